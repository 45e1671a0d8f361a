#include "refineq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "refineq/grids.hpp"
#include "refineq/iterate.hpp"
#include "refineq/quadrature.hpp"
#include "refineq/rng.hpp"

namespace refineq {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxTerms: return "max_terms";
        case SolveStatus::Diverged: return "diverged";
    }
    return "unknown";
}

std::string to_string(DensityStatus s) {
    switch (s) {
        case DensityStatus::Ok: return "ok";
        case DensityStatus::DerivativeUnreliable: return "derivative_unreliable";
        case DensityStatus::MaxTerms: return "max_terms";
        case DensityStatus::Diverged: return "diverged";
    }
    return "unknown";
}

double CdfSolution::operator()(double x) const { return interp.empty() ? 0.0 : interp(x); }

double DensityEstimate::operator()(double x) const { return linear_interp(grid, values, x); }

namespace {

// Window grid: uniform fill plus any supplied knots (forcing breakpoints,
// antiderivative nodes) strictly inside, endpoints exact.
std::vector<double> window_grid(const Window& w, int n, const std::vector<double>& extra) {
    if (n < 2) throw PreconditionError("window grid needs at least 2 points");
    std::vector<double> nodes = uniform_grid(w.lo, w.hi, static_cast<std::size_t>(n));
    for (double b : extra)
        if (b > w.lo && b < w.hi) nodes.push_back(b);
    std::sort(nodes.begin(), nodes.end());
    const double gap = 1e-12 * (w.hi - w.lo);
    std::vector<double> out;
    out.reserve(nodes.size());
    for (double v : nodes)
        if (out.empty() || v - out.back() > gap) out.push_back(v);
    out.front() = w.lo;
    out.back() = w.hi;
    return out;
}

void gate_contraction(const Problem& problem, const SolveParams& params, double* sampled_l) {
    if (params.trusted_contraction) {
        if (!(*params.trusted_contraction < 1.0))
            throw PreconditionError(
                "map family is expansive in mean (sampled contraction factor >= 1); "
                "the fixed-point iteration would not converge");
        *sampled_l = *params.trusted_contraction;
        return;
    }
    ContractionReport con =
        estimate_contraction_factor(problem, 256, substream_seed(params.seed, 0xC0));
    if (!con.pass)
        throw PreconditionError(
            "map family is expansive in mean (sampled contraction factor >= 1); "
            "the fixed-point iteration would not converge");
    *sampled_l = con.sampled_l;
}

CdfSolution iterate_cdf(const ClosureExtendedProblem& problem, const Antiderivative& G,
                        double alpha, const std::vector<std::size_t>& plus,
                        const std::vector<std::size_t>& minus, double theta,
                        const SolveParams& params, double sampled_l, bool detect_divergence) {
    CdfSolution out;
    out.window = params.window ? *params.window : choose_window(problem, params.seed);
    out.grid = window_grid(out.window, params.grid_points, G.grid());

    const auto& atoms = problem.base.atoms;
    const std::size_t N = out.grid.size(), A = atoms.size();
    std::vector<std::vector<double>> img(A, std::vector<double>(N));
    for (std::size_t i = 0; i < A; ++i)
        for (std::size_t j = 0; j < N; ++j) img[i][j] = problem.apply_closure(out.grid[j], i);
    std::vector<double> gat(N);
    for (std::size_t j = 0; j < N; ++j) gat[j] = G(out.grid[j]);

    std::vector<double> F(N, 0.0), next(N);
    int quiet = 0, grow = 0;
    double inc = 0.0, prev_inc = std::numeric_limits<double>::infinity();
    out.status = SolveStatus::MaxTerms;
    for (int k = 1; k <= params.max_terms; ++k) {
        Pchip itp(out.grid, F);
        for (std::size_t j = 0; j < N; ++j) {
            double acc = gat[j];
            for (std::size_t i : plus) acc += atoms[i].weight() * itp(img[i][j]);
            for (std::size_t i : minus) acc += atoms[i].weight() * (alpha - itp(img[i][j]));
            next[j] = (1.0 - theta) * F[j] + theta * acc;
        }
        inc = 0.0;
        for (std::size_t j = 0; j < N; ++j) inc = std::max(inc, std::abs(next[j] - F[j]));
        F.swap(next);
        out.terms_used = k;
        if (!std::isfinite(inc))
            throw NumericError("distribution-function iteration produced a non-finite value");
        if (inc < params.tolerance) {
            if (++quiet >= 3) {
                out.status = SolveStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
        if (detect_divergence) {
            if (inc > prev_inc) {
                if (++grow >= 10) {
                    out.status = SolveStatus::Diverged;
                    break;
                }
            } else {
                grow = 0;
            }
        }
        prev_inc = inc;
    }

    // Geometric remainder bound from the last defect and the sampled factor.
    double defect = theta > 0.0 ? inc / theta : inc;
    out.tail_estimate = sampled_l < 1.0 ? defect * sampled_l / (1.0 - sampled_l) : defect;
    out.values = F;
    out.interp = Pchip(out.grid, out.values);
    return out;
}

} // namespace

Window choose_window(const ClosureExtendedProblem& problem, std::uint64_t seed) {
    const Interval& iv = problem.base.interval;
    if (iv.bounded()) return Window{iv.lo, iv.hi, "interval"};

    IntegrabilityReport scan = scan_integrable(problem.base.g, iv);
    double glo = scan.effective_lo, ghi = scan.effective_hi;
    double s0 = glo, s1 = ghi;
    if (!(s0 < s1)) {
        s0 -= 1.0;
        s1 += 1.0;
        if (iv.bounded_below()) s0 = std::max(s0, 0.5 * (iv.lo + s1));
        if (iv.bounded_above()) s1 = std::min(s1, 0.5 * (iv.hi + s0));
    }

    const SolverConfig& cfg = problem.base.solver;
    int depth = std::max(2, cfg.mc_depth);
    std::vector<int> schedule = {std::max(1, depth / 2), depth};
    std::size_t samples = static_cast<std::size_t>(std::max(1000, std::min(cfg.mc_samples, 20000)));
    LimitCdf lim = estimate_limit_cdf(problem, {s0, s1}, schedule, samples,
                                      substream_seed(seed, 0xA1));

    const std::vector<double>& s = lim.cdf.sorted_samples();
    auto quantile = [&](double q) {
        std::size_t idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(s.size())));
        return s[std::min(idx, s.size() - 1)];
    };
    double wlo = std::min(quantile(1e-6), glo);
    double whi = std::max(quantile(1.0 - 1e-6), ghi);
    double pad = 0.02 * (whi - wlo);
    if (!(pad > 0.0)) pad = 1.0;
    wlo = std::max(iv.lo, wlo - pad);
    whi = std::min(iv.hi, whi + pad);
    return Window{wlo, whi, "quantile+forcing-support"};
}

CdfSolution solve_cdf_series(const ClosureExtendedProblem& problem, const Antiderivative& G,
                             const SolveParams& params) {
    SignSplit split = classify_atoms(problem.base);
    if (!split.minus_atoms.empty())
        throw PreconditionError(
            "the truncated series needs an all-increasing family; "
            "decreasing maps present - use the reflected iteration");
    double sampled_l = 0.0;
    gate_contraction(problem.base, params, &sampled_l);
    CdfSolution out = iterate_cdf(problem, G, 0.0, split.plus_atoms, split.minus_atoms,
                                  /*theta=*/1.0, params, sampled_l, /*detect_divergence=*/false);
    out.alpha_mass = out.values.back() - out.values.front();
    return out;
}

CdfSolution solve_cdf_reflected(const ClosureExtendedProblem& problem, const Antiderivative& G,
                                double alpha, const SolveParams& params) {
    SignSplit split = classify_atoms(problem.base);
    double sampled_l = 0.0;
    gate_contraction(problem.base, params, &sampled_l);
    if (!(params.damping > 0.0 && params.damping <= 1.0))
        throw PreconditionError("damping must lie in (0, 1]");
    CdfSolution out = iterate_cdf(problem, G, alpha, split.plus_atoms, split.minus_atoms,
                                  params.damping, params, sampled_l, /*detect_divergence=*/true);
    out.alpha_mass = alpha;
    return out;
}

DensityEstimate derive_density(const CdfSolution& F) {
    if (F.grid.size() < 3) throw PreconditionError("need at least 3 nodes to differentiate");
    DensityEstimate d;
    d.grid = F.grid;
    d.values = finite_difference_derivative(F.grid, F.values);
    d.construction = "derivative_of_cdf";
    d.terms_used = F.terms_used;
    d.tail_estimate = F.tail_estimate;

    std::vector<double> av(d.values.size());
    for (std::size_t j = 0; j < av.size(); ++j) av[j] = std::abs(d.values[j]);
    d.l1_norm = trapezoid(d.grid, av);

    // Re-integration self check: sub-grid jumps in F make the stencil
    // derivative meaningless, and they show up as drift between the
    // cumulative trapezoid of f and F itself.
    std::vector<double> cum = cumulative_trapezoid(F.grid, d.values);
    double drift = 0.0, vmin = F.values.front(), vmax = F.values.front(), hmax = 0.0;
    for (std::size_t j = 0; j < F.grid.size(); ++j) {
        drift = std::max(drift, std::abs(cum[j] - (F.values[j] - F.values.front())));
        vmin = std::min(vmin, F.values[j]);
        vmax = std::max(vmax, F.values[j]);
        if (j + 1 < F.grid.size()) hmax = std::max(hmax, F.grid[j + 1] - F.grid[j]);
    }
    double span = F.grid.back() - F.grid.front();
    double reint_tol = span > 0.0 ? 10.0 * hmax * (vmax - vmin) / span : 0.0;

    if (F.status == SolveStatus::Diverged) d.status = DensityStatus::Diverged;
    else if (F.status == SolveStatus::MaxTerms) d.status = DensityStatus::MaxTerms;
    else if (drift > reint_tol) d.status = DensityStatus::DerivativeUnreliable;
    else d.status = DensityStatus::Ok;
    return d;
}

DensityEstimate cascade_iterate(const ClosureExtendedProblem& problem, const SolveParams& params) {
    double sampled_l = 0.0;
    gate_contraction(problem.base, params, &sampled_l);

    DensityEstimate out;
    Window w = params.window ? *params.window : choose_window(problem, params.seed);
    out.grid = window_grid(w, params.grid_points, problem.base.g.breakpoints());
    out.construction = "cascade";

    const auto& atoms = problem.base.atoms;
    const Forcing& g = problem.base.g;
    const std::size_t N = out.grid.size(), A = atoms.size();
    std::vector<std::vector<double>> img(A, std::vector<double>(N)), slp(A, std::vector<double>(N));
    for (std::size_t i = 0; i < A; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            img[i][j] = problem.apply_closure(out.grid[j], i);
            slp[i][j] = std::abs(atoms[i].slope(out.grid[j]));
        }
    std::vector<double> gat(N);
    for (std::size_t j = 0; j < N; ++j) gat[j] = g(out.grid[j]);

    std::vector<double> f = gat, next(N), diff(N);
    int quiet = 0, grow = 0;
    double inc = 0.0, prev_inc = std::numeric_limits<double>::infinity();
    DensityStatus status = DensityStatus::MaxTerms;
    for (int k = 1; k <= params.max_terms; ++k) {
        for (std::size_t j = 0; j < N; ++j) {
            double acc = gat[j];
            for (std::size_t i = 0; i < A; ++i)
                acc += atoms[i].weight() * slp[i][j] * linear_interp(out.grid, f, img[i][j]);
            next[j] = acc;
        }
        for (std::size_t j = 0; j < N; ++j) diff[j] = std::abs(next[j] - f[j]);
        inc = trapezoid(out.grid, diff);
        f.swap(next);
        out.terms_used = k;
        if (!std::isfinite(inc)) throw NumericError("cascade iteration produced a non-finite value");
        if (inc < params.tolerance) {
            if (++quiet >= 3) {
                status = DensityStatus::Ok;
                break;
            }
        } else {
            quiet = 0;
        }
        if (inc > prev_inc) {
            if (++grow >= 10) {
                status = DensityStatus::Diverged;
                break;
            }
        } else {
            grow = 0;
        }
        prev_inc = inc;
    }

    out.values = std::move(f);
    out.status = status;
    out.tail_estimate = inc;
    std::vector<double> av(N);
    for (std::size_t j = 0; j < N; ++j) av[j] = std::abs(out.values[j]);
    out.l1_norm = trapezoid(out.grid, av);
    out.residual_l1 = residual_refinement(out, problem.base, 4 * params.grid_points);
    return out;
}

double residual_refinement(const DensityEstimate& f, const Problem& problem, int quad_points) {
    if (f.grid.size() < 2) throw PreconditionError("density estimate has no grid");
    Window w{f.grid.front(), f.grid.back(), "density-grid"};
    std::vector<double> extra = f.grid;
    for (double b : problem.g.breakpoints()) extra.push_back(b);
    std::vector<double> nodes = window_grid(w, std::max(quad_points, 2), extra);

    // The defect is defined on the open interval; drop nodes sitting on a
    // finite endpoint (or beyond it), where conjugated map derivatives can
    // degenerate to 0/0.
    nodes.erase(std::remove_if(nodes.begin(), nodes.end(),
                               [&](double x) { return !problem.interval.contains(x); }),
                nodes.end());
    if (nodes.size() < 2)
        throw PreconditionError("density grid has no overlap with the problem interval");

    std::vector<double> r(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        double x = nodes[j];
        double acc = f(x) - problem.g(x);
        for (const auto& atom : problem.atoms)
            acc -= atom.weight() * std::abs(atom.slope(x)) * f(atom.apply(x));
        r[j] = std::abs(acc);
    }
    return trapezoid(nodes, r);
}

double residual_cdf_fixed_point(const CdfSolution& F, const ClosureExtendedProblem& problem,
                                const Antiderivative& G, double alpha) {
    SignSplit split = classify_atoms(problem.base);
    const auto& atoms = problem.base.atoms;
    double worst = 0.0;
    for (std::size_t j = 0; j < F.grid.size(); ++j) {
        double x = F.grid[j];
        double rf = G(x);
        for (std::size_t i : split.plus_atoms)
            rf += atoms[i].weight() * F(problem.apply_closure(x, i));
        for (std::size_t i : split.minus_atoms)
            rf += atoms[i].weight() * (alpha - F(problem.apply_closure(x, i)));
        worst = std::max(worst, std::abs(F.values[j] - rf));
    }
    return worst;
}

ManufacturedPair manufacture_forcing(const Problem& problem, const PointwiseDensity& f_true,
                                     int table_points) {
    if (f_true.breakpoints.size() < 2)
        throw PreconditionError(
            "manufacturing needs at least two breakpoints delimiting the support of the density");
    for (double b : f_true.breakpoints)
        if (!std::isfinite(b)) throw PreconditionError("density breakpoints must be finite");
    if (table_points < 2) throw PreconditionError("table needs at least 2 points");

    ManufacturedPair pair;
    pair.f_true = f_true;

    const std::vector<MapAtom> atoms = problem.atoms;
    const std::function<double(double)> feval = f_true.eval;
    auto geval = [atoms, feval](double x) {
        double acc = feval(x);
        for (const auto& a : atoms) acc -= a.weight() * std::abs(a.slope(x)) * feval(a.apply(x));
        return acc;
    };

    // Knots: breakpoints of f and their preimages under every atom (the
    // composed term is non-smooth exactly there).
    std::vector<double> knots = f_true.breakpoints;
    for (const auto& atom : problem.atoms)
        for (double b : f_true.breakpoints) {
            try {
                double pre = invert_map(atom, b, problem.interval);
                if (std::isfinite(pre)) knots.push_back(pre);
            } catch (const NumericError&) {
                // no preimage inside the interval: nothing to mark
            }
        }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                knots.end());

    const double hull_lo = knots.front(), hull_hi = knots.back();
    QuadOptions opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-12;
    double signed_mass =
        integrate_with_breakpoints(geval, hull_lo, hull_hi, knots, opt).value;
    double abs_mass = integrate_with_breakpoints([&](double x) { return std::abs(geval(x)); },
                                                 hull_lo, hull_hi, knots, opt)
                          .value;
    if (!std::isfinite(signed_mass) || !std::isfinite(abs_mass))
        throw NumericError("manufactured forcing is not integrable over its support");
    if (std::abs(signed_mass) > 1e-6 * std::max(1.0, abs_mass)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "manufactured forcing violates the zero-mass identity: integral = %.17g",
                      signed_mass);
        throw NumericError(buf);
    }
    pair.g_integral = signed_mass;
    pair.g_exact = Forcing::from_callable(geval, knots);

    // Table: uniform fill plus twin knots straddling every potential jump.
    std::vector<double> abscissae = uniform_grid(hull_lo, hull_hi,
                                                 static_cast<std::size_t>(table_points));
    for (double b : knots) {
        double d = 1e-9 * std::max(1.0, std::abs(b));
        if (b - d > hull_lo) abscissae.push_back(b - d);
        if (b + d < hull_hi) abscissae.push_back(b + d);
        abscissae.push_back(b);
    }
    std::sort(abscissae.begin(), abscissae.end());
    std::vector<std::pair<double, double>> rows;
    rows.reserve(abscissae.size());
    for (double t : abscissae) {
        if (!rows.empty() && t - rows.back().first < 5e-10) continue;
        if (!problem.interval.contains_closure(t)) continue;
        rows.emplace_back(t, geval(t));
    }
    pair.g_table = Forcing::from_table(std::move(rows));
    return pair;
}

} // namespace refineq
