#pragma once

#include <cstdint>
#include <vector>

#include "refineq/cdf.hpp"
#include "refineq/problem.hpp"

namespace refineq {

// A finite word of atom indices; position 0 is applied first.
using Word = std::vector<std::uint32_t>;

// Left-to-right composition of the closure-extended maps along `word`.
double apply_word(const ClosureExtendedProblem& problem, double x, const Word& word);

// One random path (depth iterates, the starting point excluded). Atoms are
// drawn independently with their weights from the documented generator;
// identical seeds give identical paths.
std::vector<double> sample_trajectory(const ClosureExtendedProblem& problem, double x, int depth,
                                      std::uint64_t seed);

// Exact law of the depth-th iterate from x: full tree expansion with
// mass-weighted merging of locations closer than 1e-12. Throws
// SupportBudgetError when a level would exceed max_support points.
AtomicDistribution exact_distribution(const ClosureExtendedProblem& problem, double x, int depth,
                                      std::size_t max_support);

// ECDF of `samples` independent trajectory endpoints; sample i uses the
// substream seed derived from (seed, i).
EmpiricalCdf empirical_cdf(const ClosureExtendedProblem& problem, double x, int depth,
                           std::size_t samples, std::uint64_t seed);

// Mean |n-th iterate from x - n-th iterate from y| under shared draws, for
// n = 1..depth. Empirical counterpart of the contraction-in-mean bound.
std::vector<double> mean_pair_distance(const ClosureExtendedProblem& problem, double x, double y,
                                       int depth, std::size_t samples, std::uint64_t seed);

struct LimitCdfParams {
    double diag_tol = 0.02;
};

struct LimitCdf {
    EmpiricalCdf cdf;              // deepest depth, first start
    std::vector<int> depths;       // the schedule actually used
    std::vector<double> depth_ks;  // KS between consecutive depths (first start)
    double cross_start_ks = 0.0;   // max KS across starts at the deepest depth
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double boundary_mass_lo = 0.0; // mass sitting exactly on a finite endpoint
    double boundary_mass_hi = 0.0;
    bool converged = false;
};

// Estimates the limit distribution function of the iterates: samples
// trajectories from every start, records them at each scheduled depth, and
// diagnoses convergence by KS trends. Never throws on non-convergence; the
// flag carries the verdict.
LimitCdf estimate_limit_cdf(const ClosureExtendedProblem& problem,
                            const std::vector<double>& starts,
                            const std::vector<int>& depth_schedule, std::size_t samples,
                            std::uint64_t seed, const LimitCdfParams& params = {});

} // namespace refineq
