#include "refineq/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "refineq/grids.hpp"
#include "refineq/quadrature.hpp"
#include "refineq/rng.hpp"

namespace refineq {

namespace {

// Random point in the interval, distributed over the same tanh-compressed
// cover the probe grids use so unbounded intervals get both core and tail
// probes.
double draw_point(const Interval& iv, Rng& rng) {
    if (iv.bounded()) {
        double u = rng.next_double();
        // keep strictly interior
        double x = iv.lo + (iv.hi - iv.lo) * u;
        if (x <= iv.lo || x >= iv.hi) x = 0.5 * (iv.lo + iv.hi);
        return x;
    }
    double u = 2.0 * rng.next_double() - 1.0;
    while (std::abs(u) > 0.999999) u = 2.0 * rng.next_double() - 1.0;
    double t = 3.0 * std::atanh(u);
    if (iv.bounded_below()) return iv.lo + std::exp(t);
    if (iv.bounded_above()) return iv.hi - std::exp(-t);
    return t;
}

} // namespace

ContractionReport estimate_contraction_factor(const Problem& problem, int probe_pairs,
                                              std::uint64_t seed) {
    if (probe_pairs < 100)
        throw PreconditionError("contraction estimate needs at least 100 probe pairs");

    ContractionReport report;

    bool all_affine = true;
    double analytic = 0.0;
    for (const auto& atom : problem.atoms) {
        double slope = 0.0;
        if (atom.affine(&slope))
            analytic += atom.weight() * std::abs(slope);
        else
            all_affine = false;
    }
    if (all_affine) report.analytic_l = analytic;

    Rng rng(seed);
    double worst = 0.0;
    for (int k = 0; k < probe_pairs; ++k) {
        double x = draw_point(problem.interval, rng);
        double y = draw_point(problem.interval, rng);
        if (x == y) continue;
        double mean = 0.0;
        for (const auto& atom : problem.atoms)
            mean += atom.weight() * std::abs(atom.apply(x) - atom.apply(y));
        double quotient = mean / std::abs(x - y);
        if (std::isfinite(quotient)) worst = std::max(worst, quotient);
    }
    report.sampled_l = worst;
    report.pass = worst < 1.0;
    return report;
}

DisplacementReport check_displacement_integrability(const Problem& problem,
                                                    const std::vector<double>& probes) {
    DisplacementReport report;
    report.probes = probes;
    report.values.reserve(probes.size());
    for (double x : probes) {
        double mean = 0.0;
        for (const auto& atom : problem.atoms) mean += atom.weight() * std::abs(atom.apply(x) - x);
        report.values.push_back(mean);
        if (!std::isfinite(mean) && report.pass) {
            report.pass = false;
            char buf[128];
            std::snprintf(buf, sizeof(buf), "mean displacement is not finite at x = %.17g", x);
            report.note = buf;
        }
    }
    return report;
}

Antiderivative build_antiderivative(const Problem& problem, int grid_points) {
    if (grid_points < 64) throw PreconditionError("antiderivative grid needs at least 64 points");

    const IntegrabilityReport scan = scan_integrable(problem.g, problem.interval);
    double lo = scan.effective_lo, hi = scan.effective_hi;
    if (!(lo < hi)) {
        lo = lo - 1.0;
        hi = hi + 1.0;
    }

    Antiderivative G;
    G.abs_mass_ = scan.abs_mass;

    // Nodes: uniform fill plus every forcing breakpoint, so kinks of G land
    // on grid nodes and the cubic stays faithful between them.
    std::vector<double> nodes = uniform_grid(lo, hi, static_cast<std::size_t>(grid_points));
    for (double b : problem.g.breakpoints())
        if (b > lo && b < hi) nodes.push_back(b);
    std::sort(nodes.begin(), nodes.end());
    const double span = hi - lo;
    std::vector<double> dedup;
    dedup.reserve(nodes.size());
    for (double v : nodes)
        if (dedup.empty() || v - dedup.back() > 1e-12 * span) dedup.push_back(v);
    dedup.back() = hi;

    double sup_g = 0.0, sup_loc = dedup.front();
    QuadOptions opt;
    opt.abs_tol = 1e-13 * std::max(1.0, scan.abs_mass);
    opt.rel_tol = 1e-12;
    opt.observer = [&](double x, double fx) {
        double a = std::abs(fx);
        if (a > sup_g) {
            sup_g = a;
            sup_loc = x;
        }
    };

    std::vector<double> values(dedup.size(), 0.0);
    const auto& g = problem.g;
    for (std::size_t i = 0; i + 1 < dedup.size(); ++i) {
        QuadResult cell = integrate_adaptive([&](double t) { return g(t); }, dedup[i], dedup[i + 1], opt);
        if (!std::isfinite(cell.value))
            throw NumericError("antiderivative tabulation hit a non-finite integral");
        values[i + 1] = values[i] + cell.value;
    }

    // The quadrature abscissae are interior; sample the nodes themselves so
    // the sup-|g| surrogate sees the effective-support boundary too.
    for (double x : dedup) {
        double a = std::abs(g(x));
        if (std::isfinite(a) && a > sup_g) {
            sup_g = a;
            sup_loc = x;
        }
    }

    G.grid_ = std::move(dedup);
    G.values_ = std::move(values);
    G.total_mass_ = G.values_.back();
    G.sup_g_ = sup_g;
    G.sup_loc_ = sup_loc;
    G.interp_ = Pchip(G.grid_, G.values_);
    return G;
}

double Antiderivative::operator()(double x) const {
    if (grid_.empty()) return 0.0;
    if (x <= grid_.front()) return values_.front();
    if (x >= grid_.back()) return values_.back();
    return interp_(x);
}

LipschitzEstimate estimate_lipschitz(const Antiderivative& G) {
    return LipschitzEstimate{G.sup_g(), G.sup_g_location()};
}

SurvivalIntegralReport evaluate_survival_integral(const Antiderivative& G, const Forcing& g,
                                                  const CdfView& D, double tol) {
    SurvivalIntegralReport report;
    report.scale = G.abs_mass();
    report.tol = tol;

    const std::vector<double> jumps = D.jump_points();
    if (!jumps.empty()) {
        // Purely atomic law: integral of g * P(X > t) over t collapses to the
        // mass-weighted sum of G at the jump locations.
        double acc = 0.0;
        for (double t : jumps) {
            double mass = D.value(t) - D.value_left(t);
            acc += mass * G(t);
        }
        report.value = acc;
    } else {
        if (G.grid().empty()) {
            report.value = 0.0;
        } else {
            QuadOptions opt;
            opt.abs_tol = 1e-13 * std::max(1.0, report.scale);
            opt.rel_tol = 1e-12;
            std::vector<double> knots = g.breakpoints();
            report.value = integrate_with_breakpoints(
                               [&](double t) { return g(t) * (1.0 - D.value(t)); },
                               G.grid().front(), G.grid().back(), knots, opt)
                               .value;
        }
    }

    report.pass = std::abs(report.value) <= tol * report.scale;
    return report;
}

} // namespace refineq
