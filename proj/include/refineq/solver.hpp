#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "refineq/hypotheses.hpp"
#include "refineq/interp.hpp"
#include "refineq/problem.hpp"

namespace refineq {

// Finite working window: all grids live here, iterates are extended
// constantly (distribution functions) or by zero (densities) outside.
struct Window {
    double lo = 0.0;
    double hi = 0.0;
    std::string how; // "interval" | "quantile+forcing-support"
};

enum class SolveStatus { Converged, MaxTerms, Diverged };
std::string to_string(SolveStatus s);

struct SolveParams {
    int grid_points = 2048;
    int max_terms = 400;
    double tolerance = 1e-8;
    double damping = 0.5;          // reflected iteration only
    std::optional<Window> window;  // computed from the limit law when absent
    std::uint64_t seed = 1;        // window estimation + contraction gate
    // Contraction factor established in equivalent coordinates (e.g. before a
    // change of variables). When set, the sampled gate is skipped and this
    // value feeds the tail estimate instead.
    std::optional<double> trusted_contraction;
};

// Distribution-function solution F tabulated on a window grid, with a
// shape-preserving cubic between nodes and constant extension outside.
struct CdfSolution {
    std::vector<double> grid;
    std::vector<double> values;
    double alpha_mass = 0.0;    // reflected: the alpha used; series: F range
    int terms_used = 0;
    double tail_estimate = 0.0; // geometric bound on the truncated remainder
    Window window;
    SolveStatus status = SolveStatus::MaxTerms;
    Pchip interp;

    double operator()(double x) const;
};

// Chooses the window: the interval itself when bounded, otherwise the
// [1e-6, 1-1e-6] quantile hull of the estimated limit law, widened by the
// effective support of g and a 2% pad, clipped back to the interval.
Window choose_window(const ClosureExtendedProblem& problem, std::uint64_t seed);

// Truncated series for the all-increasing case: F_0 = 0,
// F_{k+1}(x) = sum_i p_i F_k(map_i(x)) + G(x) on the grid. Stops when the
// sup increment stays below tolerance three times in a row. Refuses
// families with decreasing maps or an expansive sampled contraction factor.
CdfSolution solve_cdf_series(const ClosureExtendedProblem& problem, const Antiderivative& G,
                             const SolveParams& params);

// Damped fixed-point iteration for the general sign split:
// R F(x) = sum_plus p_i F(map_i(x)) + sum_minus p_i (alpha - F(map_i(x))) + G(x),
// F <- (1-theta) F + theta R F. Ten consecutive growing increments mark
// divergence instead of throwing.
CdfSolution solve_cdf_reflected(const ClosureExtendedProblem& problem, const Antiderivative& G,
                                double alpha, const SolveParams& params);

enum class DensityStatus { Ok, DerivativeUnreliable, MaxTerms, Diverged };
std::string to_string(DensityStatus s);

// Density tabulated on a window grid; linear between nodes, zero outside.
struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> values;
    double l1_norm = 0.0;
    std::string construction; // "derivative_of_cdf" | "cascade"
    std::optional<double> residual_l1;
    DensityStatus status = DensityStatus::Ok;
    int terms_used = 0;
    double tail_estimate = 0.0;

    double operator()(double x) const;
};

// Differentiates a distribution-function solution with three-point stencils
// and checks itself by re-integration: when the cumulative trapezoid of the
// result drifts from F by more than a grid-scale tolerance (sub-grid jumps
// in F), the estimate is flagged DerivativeUnreliable.
DensityEstimate derive_density(const CdfSolution& F);

// Direct density iteration f_0 = g,
// f_{k+1}(x) = sum_i p_i |map_i'(x)| f_k(map_i(x)) + g(x), stopping on the
// L1 increment. The refinement residual of the final iterate is attached.
DensityEstimate cascade_iterate(const ClosureExtendedProblem& problem, const SolveParams& params);

// L1 norm over the window of f - sum_i p_i |map_i'| f(map_i) - g.
double residual_refinement(const DensityEstimate& f, const Problem& problem, int quad_points);

// Sup over the grid of |F - R F| with R the reflected fixed-point operator.
double residual_cdf_fixed_point(const CdfSolution& F, const ClosureExtendedProblem& problem,
                                const Antiderivative& G, double alpha);

// A density given pointwise with its non-smooth locations.
struct PointwiseDensity {
    std::function<double(double)> eval;
    std::vector<double> breakpoints;
};

// Forcing manufactured from a known density:
// g = f - sum_i p_i |map_i'| f(map_i), emitted both as an exact callable and
// as a table (knots at the breakpoints of f and their preimages under every
// atom, jumps straddled by twin knots).
struct ManufacturedPair {
    PointwiseDensity f_true;
    Forcing g_exact; // native callable
    Forcing g_table; // piecewise-linear table, suitable for serialization
    double g_integral = 0.0;
};

// Throws NumericError when the zero-mass identity integral of g = 0 is
// violated beyond 1e-6 (relative to the mass of |g|).
ManufacturedPair manufacture_forcing(const Problem& problem, const PointwiseDensity& f_true,
                                     int table_points);

} // namespace refineq
