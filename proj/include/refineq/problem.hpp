#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "refineq/expr.hpp"
#include "refineq/interval.hpp"

namespace refineq {

// One atom of the random map: a diffeomorphism candidate with its weight.
// The derivative expression is optional; central differences with step
// h = 1e-6*max(1,|x|) stand in when it is absent. Affine maps are detected
// once and evaluated on a fast path.
class MapAtom {
public:
    MapAtom(double weight, Expr map, Expr derivative = nullptr, Expr inverse = nullptr);

    double weight() const { return weight_; }
    double apply(double x) const;
    double slope(double x) const;

    bool has_derivative_expr() const { return deriv_ != nullptr; }
    bool has_inverse_expr() const { return inverse_ != nullptr; }
    const Expr& map_expr() const { return map_; }
    const Expr& derivative_expr() const { return deriv_; }
    const Expr& inverse_expr() const { return inverse_; }

    bool affine(double* slope_out = nullptr, double* intercept_out = nullptr) const;

private:
    double weight_;
    Expr map_, deriv_, inverse_;
    bool affine_ = false;
    double aff_slope_ = 0.0, aff_intercept_ = 0.0;
};

// The inhomogeneity g: an expression in t, a piecewise-linear table
// (zero outside its knots), or a native callable with known breakpoints.
class Forcing {
public:
    Forcing(); // constant zero
    static Forcing from_expression(Expr e);
    static Forcing from_expression_text(const std::string& src); // variable "t"
    static Forcing from_table(std::vector<std::pair<double, double>> knots);
    static Forcing from_callable(std::function<double(double)> f,
                                 std::vector<double> breakpoints);

    double operator()(double t) const;
    const std::string& kind() const { return kind_; } // expression | table | native
    // Locations where g may be non-smooth; quadrature splits here.
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<std::pair<double, double>>& table() const { return table_; }
    const Expr& expr() const { return expr_; }

private:
    std::string kind_;
    Expr expr_;
    std::vector<std::pair<double, double>> table_;
    std::vector<double> table_t_, table_v_;
    std::function<double(double)> callable_;
    std::vector<double> breakpoints_;
};

// Result of the absolute-integrability scan of g over I: the signed and
// absolute masses and the finite sub-interval outside of which the |g|-tail
// is below 1e-12 of the total.
struct IntegrabilityReport {
    double abs_mass = 0.0;
    double signed_mass = 0.0;
    double effective_lo = 0.0;
    double effective_hi = 0.0;
    bool converged = true;
};

struct SolverConfig {
    int grid_points = 2048;
    int max_terms = 400;
    double tolerance = 1e-8;
    int mc_samples = 100000;
    int mc_depth = 40;
    std::uint64_t seed = 1;
};

struct Problem {
    std::string label;
    Interval interval;
    std::vector<MapAtom> atoms;
    Forcing g;
    std::optional<double> alpha_mass;
    SolverConfig solver;
    IntegrabilityReport g_report;
};

// Throws ConfigError unless the weights are in (0,1] and sum to 1 within
// 1e-12.
void check_weights(const std::vector<MapAtom>& atoms);

// Absolute-integrability scan: integrates |g| over a growing family of
// shells (geometric toward each endpoint, doubling on unbounded sides)
// until the shell mass falls below 1e-12 of the running total twice in a
// row. Throws ConfigError when 60 expansions are not enough.
IntegrabilityReport scan_integrable(const Forcing& g, const Interval& iv);

struct AtomValidation {
    bool monotone = false;
    bool increasing = false;
    bool derivative_nonvanishing = false;
    bool derivative_matches = true; // only tested when an expression is given
    bool inverse_matches = true;    // only tested when an expression is given
    bool maps_into = false;
    bool onto_heuristic = false;
    bool pass = false;
    std::string note;
};

struct FamilyValidation {
    std::vector<AtomValidation> atoms;
    bool pass = false;
};

// Diffeomorphism checks on a probe grid: strict monotonicity, nonvanishing
// derivative of constant sign, values inside the interval, endpoint-limit
// behavior (surjectivity is heuristic: pointwise data cannot certify onto).
FamilyValidation validate_map_family(const Problem& problem, int probes = 64);

struct SignSplit {
    std::vector<std::size_t> plus_atoms;  // increasing maps
    std::vector<std::size_t> minus_atoms; // decreasing maps
    double p_plus = 0.0;
};

// Partitions atoms by derivative sign. The sign is read at the first probe
// and asserted identical at every other probe; inconsistency or a vanishing
// derivative throws PreconditionError.
SignSplit classify_atoms(const Problem& problem, const std::vector<double>& probe_points);
SignSplit classify_atoms(const Problem& problem); // default probe grid

// The random map extended to the closure of I: finite endpoints map to
// their one-sided limits, which must themselves be endpoints.
struct ClosureExtendedProblem {
    Problem base;
    struct BoundaryValues {
        double at_lo = 0.0, at_hi = 0.0;
    };
    std::vector<BoundaryValues> boundary; // one entry per atom

    double apply_closure(double x, std::size_t atom_index) const;
};

// Estimates one-sided limits along geometric approach sequences. On an
// interval without finite endpoints this is the identity extension.
// Nonfinite or interior limits are rejected with PreconditionError.
ClosureExtendedProblem extend_to_closure(const Problem& problem);

// Solves map(x) = y by monotone bracketing + bisection when no inverse
// expression is stored.
double invert_map(const MapAtom& atom, double y, const Interval& iv);

} // namespace refineq
