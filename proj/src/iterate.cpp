#include "refineq/iterate.hpp"

#include <algorithm>
#include <cmath>

#include "refineq/errors.hpp"
#include "refineq/rng.hpp"

namespace refineq {

namespace {

// Cumulative weights for inverse-transform atom draws.
std::vector<double> cumulative_weights(const Problem& p) {
    std::vector<double> cw;
    cw.reserve(p.atoms.size());
    double s = 0.0;
    for (const auto& a : p.atoms) {
        s += a.weight();
        cw.push_back(s);
    }
    cw.back() = 1.0; // guard rounding so the last atom is always reachable
    return cw;
}

std::uint32_t draw_atom(Rng& rng, const std::vector<double>& cw) {
    double u = rng.next_double();
    auto it = std::upper_bound(cw.begin(), cw.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cw.begin());
    if (i >= cw.size()) i = cw.size() - 1;
    return static_cast<std::uint32_t>(i);
}

} // namespace

double apply_word(const ClosureExtendedProblem& problem, double x, const Word& word) {
    for (std::uint32_t w : word) {
        if (w >= problem.base.atoms.size())
            throw PreconditionError("word contains an out-of-range atom index");
        x = problem.apply_closure(x, w);
    }
    return x;
}

std::vector<double> sample_trajectory(const ClosureExtendedProblem& problem, double x, int depth,
                                      std::uint64_t seed) {
    if (depth < 1) throw PreconditionError("trajectory depth must be >= 1");
    auto cw = cumulative_weights(problem.base);
    Rng rng(seed);
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(depth));
    for (int n = 0; n < depth; ++n) {
        x = problem.apply_closure(x, draw_atom(rng, cw));
        path.push_back(x);
    }
    return path;
}

AtomicDistribution exact_distribution(const ClosureExtendedProblem& problem, double x, int depth,
                                      std::size_t max_support) {
    if (depth < 0) throw PreconditionError("depth must be >= 0");
    const std::size_t natoms = problem.base.atoms.size();

    std::vector<std::pair<double, double>> level = {{x, 1.0}};
    for (int n = 0; n < depth; ++n) {
        if (level.size() * natoms > max_support)
            throw SupportBudgetError(
                "exact distribution support would exceed the budget at depth " +
                std::to_string(n + 1) + "; use the Monte Carlo estimator instead");
        std::vector<std::pair<double, double>> next;
        next.reserve(level.size() * natoms);
        for (const auto& [loc, mass] : level)
            for (std::size_t i = 0; i < natoms; ++i)
                next.emplace_back(problem.apply_closure(loc, i),
                                  mass * problem.base.atoms[i].weight());
        std::sort(next.begin(), next.end());
        // Mass-weighted merge of locations within 1e-12 of the cluster head.
        std::vector<std::pair<double, double>> merged;
        for (const auto& [loc, mass] : next) {
            if (!merged.empty() && std::fabs(loc - merged.back().first) <= 1e-12) {
                double m = merged.back().second + mass;
                merged.back().first =
                    (merged.back().first * merged.back().second + loc * mass) / m;
                merged.back().second = m;
            } else {
                merged.emplace_back(loc, mass);
            }
        }
        level = std::move(merged);
    }
    return AtomicDistribution{std::move(level)};
}

EmpiricalCdf empirical_cdf(const ClosureExtendedProblem& problem, double x, int depth,
                           std::size_t samples, std::uint64_t seed) {
    if (samples < 1) throw PreconditionError("need at least one sample");
    auto cw = cumulative_weights(problem.base);
    std::vector<double> endpoints(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        Rng rng(substream_seed(seed, i));
        double v = x;
        for (int n = 0; n < depth; ++n) v = problem.apply_closure(v, draw_atom(rng, cw));
        endpoints[i] = v;
    }
    return EmpiricalCdf(std::move(endpoints));
}

std::vector<double> mean_pair_distance(const ClosureExtendedProblem& problem, double x, double y,
                                       int depth, std::size_t samples, std::uint64_t seed) {
    if (depth < 1 || samples < 1) throw PreconditionError("need depth >= 1 and samples >= 1");
    auto cw = cumulative_weights(problem.base);
    std::vector<double> mean(static_cast<std::size_t>(depth), 0.0);
    for (std::size_t i = 0; i < samples; ++i) {
        Rng rng(substream_seed(seed, i));
        double a = x, b = y;
        for (int n = 0; n < depth; ++n) {
            std::uint32_t w = draw_atom(rng, cw);
            a = problem.apply_closure(a, w);
            b = problem.apply_closure(b, w);
            mean[static_cast<std::size_t>(n)] += std::fabs(a - b);
        }
    }
    for (double& m : mean) m /= static_cast<double>(samples);
    return mean;
}

LimitCdf estimate_limit_cdf(const ClosureExtendedProblem& problem,
                            const std::vector<double>& starts,
                            const std::vector<int>& depth_schedule, std::size_t samples,
                            std::uint64_t seed, const LimitCdfParams& params) {
    if (starts.size() < 2) throw PreconditionError("need at least two start points");
    if (depth_schedule.size() < 2) throw PreconditionError("need at least two depths");
    std::vector<int> depths(depth_schedule);
    std::sort(depths.begin(), depths.end());
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    if (depths.size() < 2) throw PreconditionError("need at least two distinct depths");
    if (depths.front() < 1) throw PreconditionError("depths must be >= 1");

    const int max_depth = depths.back();
    auto cw = cumulative_weights(problem.base);

    // One trajectory per (start, sample), recorded at each scheduled depth;
    // every start uses its own substream so adding starts never perturbs
    // the others.
    std::vector<std::vector<std::vector<double>>> rec(
        starts.size(),
        std::vector<std::vector<double>>(depths.size(), std::vector<double>(samples)));
    for (std::size_t si = 0; si < starts.size(); ++si) {
        std::uint64_t stream = substream_seed(seed, si);
        for (std::size_t i = 0; i < samples; ++i) {
            Rng rng(substream_seed(stream, i));
            double v = starts[si];
            std::size_t j = 0;
            for (int n = 1; n <= max_depth; ++n) {
                v = problem.apply_closure(v, draw_atom(rng, cw));
                if (j < depths.size() && n == depths[j]) {
                    rec[si][j][i] = v;
                    ++j;
                }
            }
        }
    }

    LimitCdf out;
    out.depths = depths;
    out.samples = samples;
    out.seed = seed;

    std::vector<std::vector<EmpiricalCdf>> cdfs(starts.size());
    for (std::size_t si = 0; si < starts.size(); ++si)
        for (std::size_t j = 0; j < depths.size(); ++j)
            cdfs[si].emplace_back(std::move(rec[si][j]));

    for (std::size_t j = 0; j + 1 < depths.size(); ++j)
        out.depth_ks.push_back(ks_distance(cdfs[0][j], cdfs[0][j + 1]));
    for (std::size_t si = 1; si < starts.size(); ++si)
        out.cross_start_ks = std::max(
            out.cross_start_ks, ks_distance(cdfs[0].back(), cdfs[si].back()));

    const auto& deepest = cdfs[0].back().sorted_samples();
    const Interval& iv = problem.base.interval;
    if (iv.bounded_below()) {
        auto n = std::count(deepest.begin(), deepest.end(), iv.lo);
        out.boundary_mass_lo = static_cast<double>(n) / static_cast<double>(samples);
    }
    if (iv.bounded_above()) {
        auto n = std::count(deepest.begin(), deepest.end(), iv.hi);
        out.boundary_mass_hi = static_cast<double>(n) / static_cast<double>(samples);
    }

    bool trend = true;
    for (std::size_t j = 1; j < out.depth_ks.size(); ++j)
        if (out.depth_ks[j] > out.depth_ks[j - 1] + 0.5 * params.diag_tol) trend = false;
    out.converged = trend && out.depth_ks.back() <= params.diag_tol &&
                    out.cross_start_ks <= params.diag_tol;

    out.cdf = cdfs[0].back();
    return out;
}

} // namespace refineq
