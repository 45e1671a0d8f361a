#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "refineq/cdf.hpp"
#include "refineq/interp.hpp"
#include "refineq/problem.hpp"

namespace refineq {

// Contraction-in-mean factor: the equation's iteration converges when the
// weighted mean displacement of two points contracts, i.e. factor < 1.
struct ContractionReport {
    std::optional<double> analytic_l; // sum of weight*|slope| for affine families
    double sampled_l = 0.0;           // max over random probe pairs
    bool pass = false;                // sampled_l < 1
};

ContractionReport estimate_contraction_factor(const Problem& problem, int probe_pairs,
                                              std::uint64_t seed);

// Weighted mean |map(x) - x| at each probe; finite by construction for
// finite atom families, so this mostly detects NaN/overflow in the maps.
struct DisplacementReport {
    std::vector<double> probes;
    std::vector<double> values;
    bool pass = true;
    std::string note;
};

DisplacementReport check_displacement_integrability(const Problem& problem,
                                                    const std::vector<double>& probes);

// The running integral of g from the lower end of the interval, tabulated
// on the effective support and interpolated by a shape-preserving cubic;
// constant outside the grid. Also tracks sup |g| seen at quadrature nodes.
class Antiderivative {
public:
    Antiderivative() = default;

    double operator()(double x) const;

    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double total_mass() const { return total_mass_; }  // integral of g over I
    double abs_mass() const { return abs_mass_; }      // integral of |g|
    double sup_g() const { return sup_g_; }
    double sup_g_location() const { return sup_loc_; }

    friend Antiderivative build_antiderivative(const Problem& problem, int grid_points);

private:
    std::vector<double> grid_, values_;
    Pchip interp_;
    double total_mass_ = 0.0, abs_mass_ = 0.0;
    double sup_g_ = 0.0, sup_loc_ = 0.0;
};

// Adaptive tabulation of G over the effective support of g (tails below
// 1e-12 of the |g|-mass are truncated). Throws ConfigError via the
// integrability scan when the tail does not converge.
Antiderivative build_antiderivative(const Problem& problem, int grid_points);

// Surrogate for the smallest Lipschitz constant of G: sup |g| over the
// nodes the quadrature touched, with the node attaining it.
struct LipschitzEstimate {
    double value = 0.0;
    double at = 0.0;
};

LipschitzEstimate estimate_lipschitz(const Antiderivative& G);

// The orthogonality integral of g against the survival function 1 - D of
// the limit law. Existence of a solution in the all-increasing case asks
// for this to vanish.
struct SurvivalIntegralReport {
    double value = 0.0;
    double scale = 0.0; // integral of |g|
    double tol = 0.0;   // relative tolerance used
    bool pass = false;  // |value| <= tol*scale
};

inline constexpr double kSurvivalTolEstimated = 1e-3;  // D from Monte Carlo
inline constexpr double kSurvivalTolClosedForm = 1e-8; // D known exactly

// For purely atomic D (empirical or exact laws) the integral reduces to the
// mass-weighted sum of G at the jump locations, which is exact given G; for
// continuous D it is computed by adaptive quadrature against g.
SurvivalIntegralReport evaluate_survival_integral(const Antiderivative& G, const Forcing& g,
                                                  const CdfView& D, double tol);

} // namespace refineq
