#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "refineq/expr.hpp"
#include "refineq/problem.hpp"
#include "refineq/solver.hpp"

namespace refineq {

// A smooth change of variables between two open intervals. `forward` maps
// `source` onto `target`, `inverse` maps back, and `derivative` is
// d(forward)/dx on `source`. All three are stored as expressions so a
// conjugated problem can be serialized back out as a config document.
//
// Conjugating by a diffeomorphism alpha: J -> I carries the equation
//   f = sum_i p_i |m_i'| f(m_i) + g   on I
// to the equivalent equation on J with maps alpha^{-1} . m_i . alpha,
// forcing |alpha'| g(alpha), and solutions related by
// f_J = |alpha'| f_I(alpha). This is what lets the solver run in whichever
// coordinates the convergence hypotheses actually hold.
struct Diffeo {
    Interval source;
    Interval target;
    Expr forward;
    Expr inverse;
    Expr derivative;

    double apply(double x) const;
    double apply_inverse(double y) const;
    double slope(double x) const;
};

// Ready-made changes of variables. `kind` is one of:
//   "logistic"  full line -> bounded interval, x -> lo + len/(1+exp(-x))
//   "affine"    intervals of the same shape (bounded->bounded, ray->ray,
//               line->line), the unique orientation-preserving affine map
//   "tan_half"  bounded interval -> full line via the shifted tangent
// Shape mismatches throw ConfigError. The returned expressions are exact,
// so round trips are accurate to rounding.
Diffeo builtin_diffeo(const std::string& kind, const Interval& source, const Interval& target);

// Swaps source and target. The derivative expression becomes
// 1 / derivative(inverse(x)) by the inverse-function rule.
Diffeo invert_diffeo(const Diffeo& d);

// Numeric sanity check on probe grids: both round trips return within
// 1e-9 (relative), the derivative expression matches a central difference,
// and the derivative is finite, nonzero, and of one sign. Throws
// ConfigError on any failure.
void validate_diffeo(const Diffeo& d, std::size_t probes = 33);

// Rewrites the problem in d.source coordinates; requires d.target to equal
// problem.interval. Weights are unchanged, maps are conjugated, derivative
// and inverse expressions are carried along when present (chain rule /
// composition), and the forcing picks up the |d'| Jacobian. The
// integrability report is re-scanned on the new interval.
Problem conjugate_problem(const Problem& problem, const Diffeo& d);

// Pushes a density estimate living on d.target to d.source:
//   f_src(x) = |d'(x)| * f(d(x)),
// tabulated on the pulled-back grid. Total integral is preserved.
DensityEstimate transport_solution(const DensityEstimate& f, const Diffeo& d);

// Inverse of transport_solution: takes a density on d.source back to
// d.target via f(y) = f_src(d^{-1}(y)) / |d'(d^{-1}(y))|. Nodes where the
// Jacobian underflows (|d'| below 1e-12 of its largest sampled value) are
// set to zero and reported in capped_nodes.
struct InverseTransportResult {
    DensityEstimate density;
    std::vector<std::size_t> capped_nodes; // indices into density.grid
};
InverseTransportResult inverse_transport_solution(const DensityEstimate& f, const Diffeo& d);

// Solves a problem whose maps and forcing live entirely on a bounded window
// (lo, hi) and returns a density on the whole line that vanishes
// identically outside [lo, hi]. `windowed.interval` must equal (lo, hi) and
// `d` must map (lo, hi) onto the full line. The equation is conjugated to
// the line through d, checked and solved there, pulled back, and extended
// by zero; the residual is evaluated on a grid covering [lo-1, hi+1]
// (inside the window against the windowed equation, outside against zero).
DensityEstimate compact_support_solve(const Problem& windowed, double lo, double hi,
                                      const Diffeo& d, const SolveParams& params);

} // namespace refineq
