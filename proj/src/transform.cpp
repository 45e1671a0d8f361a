#include "refineq/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "refineq/errors.hpp"
#include "refineq/grids.hpp"
#include "refineq/hypotheses.hpp"
#include "refineq/interp.hpp"

namespace refineq {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool same_interval(const Interval& a, const Interval& b) {
    auto same_end = [](double x, double y) {
        if (std::isfinite(x) != std::isfinite(y)) return false;
        return std::isfinite(x) ? x == y : std::signbit(x) == std::signbit(y);
    };
    return same_end(a.lo, b.lo) && same_end(a.hi, b.hi);
}

// "bounded", "ray-below" = (lo, +inf), "ray-above" = (-inf, hi), "line"
std::string shape_of(const Interval& iv) {
    if (iv.bounded()) return "bounded";
    if (iv.bounded_below()) return "ray-below";
    if (iv.bounded_above()) return "ray-above";
    return "line";
}

Diffeo affine_diffeo(const Interval& source, const Interval& target) {
    double slope = 0.0, intercept = 0.0;
    std::string s1 = shape_of(source), s2 = shape_of(target);
    if (s1 == "bounded" && s2 == "bounded") {
        slope = target.length() / source.length();
        intercept = target.lo - slope * source.lo;
    } else if (s1 == "line" && s2 == "line") {
        slope = 1.0;
        intercept = 0.0;
    } else if (s1 == "ray-below" && s2 == "ray-below") {
        slope = 1.0;
        intercept = target.lo - source.lo;
    } else if (s1 == "ray-above" && s2 == "ray-above") {
        slope = 1.0;
        intercept = target.hi - source.hi;
    } else if (s1 == "ray-below" && s2 == "ray-above") {
        slope = -1.0;
        intercept = target.hi + source.lo;
    } else if (s1 == "ray-above" && s2 == "ray-below") {
        slope = -1.0;
        intercept = target.lo + source.hi;
    } else {
        throw ConfigError("affine diffeomorphism requires source and target of the same shape; "
                          "got " + s1 + " -> " + s2);
    }
    Diffeo d;
    d.source = source;
    d.target = target;
    d.forward = parse_expression(fmt(slope) + "*x + " + fmt(intercept));
    d.inverse = parse_expression(fmt(1.0 / slope) + "*x + " + fmt(-intercept / slope));
    d.derivative = parse_expression(fmt(slope));
    return d;
}

} // namespace

double Diffeo::apply(double x) const { return eval_expression(forward, x); }
double Diffeo::apply_inverse(double y) const { return eval_expression(inverse, y); }
double Diffeo::slope(double x) const { return eval_expression(derivative, x); }

Diffeo builtin_diffeo(const std::string& kind, const Interval& source, const Interval& target) {
    if (kind == "affine") return affine_diffeo(source, target);

    Diffeo d;
    d.source = source;
    d.target = target;
    if (kind == "logistic") {
        if (source.bounded_below() || source.bounded_above())
            throw ConfigError("logistic diffeomorphism needs the full line as source");
        if (!target.bounded())
            throw ConfigError("logistic diffeomorphism needs a bounded target");
        std::string lo = fmt(target.lo), hi = fmt(target.hi), len = fmt(target.length());
        d.forward = parse_expression(lo + " + " + len + "/(1 + exp(-x))");
        d.inverse = parse_expression("log((x - " + lo + ")/(" + hi + " - x))");
        // sigma' = len * s * (1 - s) with s = 1/(1+exp(-x)); this form stays
        // finite for all x, unlike len*exp(-x)/(1+exp(-x))^2.
        d.derivative = parse_expression("(" + len + "/(1 + exp(-x)))*(1 - 1/(1 + exp(-x)))");
    } else if (kind == "tan_half") {
        if (!source.bounded())
            throw ConfigError("tan_half diffeomorphism needs a bounded source");
        if (target.bounded_below() || target.bounded_above())
            throw ConfigError("tan_half diffeomorphism needs the full line as target");
        // a(x) = A*x + B sweeps (-pi/2, pi/2) as x crosses the source.
        double A = M_PI / source.length();
        double B = -M_PI * source.lo / source.length() - 0.5 * M_PI;
        std::string a = "(" + fmt(A) + "*x + " + fmt(B) + ")";
        d.forward = parse_expression("sin" + a + "/cos" + a);
        d.inverse = parse_expression(fmt(source.lo) + " + " + fmt(source.length()) +
                                     "*(atan(x)/" + fmt(M_PI) + " + 0.5)");
        d.derivative = parse_expression(fmt(A) + "/cos" + a + "^2");
    } else {
        throw ConfigError("unknown diffeomorphism kind \"" + kind +
                          "\" (expected logistic, affine, or tan_half)");
    }
    return d;
}

Diffeo invert_diffeo(const Diffeo& d) {
    Diffeo out;
    out.source = d.target;
    out.target = d.source;
    out.forward = d.inverse;
    out.inverse = d.forward;
    out.derivative =
        make_bin(ExprNode::BinOp::Div, make_const(1.0), substitute(d.derivative, d.inverse));
    return out;
}

void validate_diffeo(const Diffeo& d, std::size_t probes) {
    if (probes < 5) throw ConfigError("diffeomorphism validation needs at least 5 probes");
    if (!d.forward || !d.inverse || !d.derivative)
        throw ConfigError("diffeomorphism is missing one of forward/inverse/derivative");

    double sign = 0.0;
    for (double x : probe_grid(d.source, probes)) {
        double y = d.apply(x);
        if (!std::isfinite(y) || !d.target.contains(y))
            throw ConfigError("diffeomorphism leaves its target interval at x = " + fmt(x));
        double back = d.apply_inverse(y);
        if (!(std::fabs(back - x) <= 1e-9 * std::max(1.0, std::fabs(x))))
            throw ConfigError("inverse round trip fails at x = " + fmt(x));

        double s = d.slope(x);
        if (!std::isfinite(s) || s == 0.0)
            throw ConfigError("derivative is zero or not finite at x = " + fmt(x));
        if (sign == 0.0)
            sign = s > 0.0 ? 1.0 : -1.0;
        else if ((s > 0.0 ? 1.0 : -1.0) != sign)
            throw ConfigError("derivative changes sign inside the source interval");

        double h = 1e-6 * std::max(1.0, std::fabs(x));
        if (d.source.bounded_below()) h = std::min(h, 0.05 * (x - d.source.lo));
        if (d.source.bounded_above()) h = std::min(h, 0.05 * (d.source.hi - x));
        double diff = (d.apply(x + h) - d.apply(x - h)) / (2.0 * h);
        if (!(std::fabs(diff - s) <= 1e-5 * std::max(1.0, std::fabs(s))))
            throw ConfigError("derivative expression disagrees with a difference quotient at x = " +
                              fmt(x));
    }
    for (double y : probe_grid(d.target, probes)) {
        double x = d.apply_inverse(y);
        if (!std::isfinite(x) || !d.source.contains(x))
            throw ConfigError("inverse leaves the source interval at y = " + fmt(y));
        double fwd = d.apply(x);
        if (!(std::fabs(fwd - y) <= 1e-9 * std::max(1.0, std::fabs(y))))
            throw ConfigError("forward round trip fails at y = " + fmt(y));
    }
}

Problem conjugate_problem(const Problem& problem, const Diffeo& d) {
    if (!same_interval(d.target, problem.interval))
        throw ConfigError("the diffeomorphism target " + d.target.to_string() +
                          " does not match the problem interval " + problem.interval.to_string());

    Problem out;
    out.label = problem.label;
    out.interval = d.source;
    out.alpha_mass = problem.alpha_mass;
    out.solver = problem.solver;

    for (const MapAtom& atom : problem.atoms) {
        Expr conj_map = substitute(d.inverse, substitute(atom.map_expr(), d.forward));
        Expr conj_deriv = nullptr;
        if (atom.has_derivative_expr()) {
            // chain rule: (a^-1 . m . a)' = m'(a(x)) a'(x) / a'(conjugated(x))
            Expr num = make_bin(ExprNode::BinOp::Mul,
                                substitute(atom.derivative_expr(), d.forward), d.derivative);
            conj_deriv = make_bin(ExprNode::BinOp::Div, num, substitute(d.derivative, conj_map));
        }
        Expr conj_inv = nullptr;
        if (atom.has_inverse_expr())
            conj_inv = substitute(d.inverse, substitute(atom.inverse_expr(), d.forward));
        out.atoms.emplace_back(atom.weight(), conj_map, conj_deriv, conj_inv);
    }

    if (problem.g.kind() == "expression") {
        Expr jac = make_call(FuncId::Abs, {d.derivative});
        Expr composed = substitute(problem.g.expr(), d.forward);
        out.g = Forcing::from_expression(make_bin(ExprNode::BinOp::Mul, jac, composed));
    } else {
        Diffeo chart = d;
        Forcing g = problem.g;
        auto eval = [chart, g](double x) {
            double y = chart.apply(x);
            if (!std::isfinite(y)) return 0.0;
            double v = g(y);
            if (v == 0.0) return 0.0; // avoids inf * 0 where the Jacobian blows up
            double r = std::fabs(chart.slope(x)) * v;
            return std::isfinite(r) ? r : 0.0;
        };
        std::vector<double> bps;
        for (double b : problem.g.breakpoints()) {
            double x = d.apply_inverse(b);
            if (std::isfinite(x) && d.source.contains(x)) bps.push_back(x);
        }
        std::sort(bps.begin(), bps.end());
        out.g = Forcing::from_callable(eval, bps);
    }
    out.g_report = scan_integrable(out.g, out.interval);
    return out;
}

namespace {

double abs_trapezoid(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<double> a(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) a[i] = std::fabs(ys[i]);
    return trapezoid(xs, a);
}

} // namespace

DensityEstimate transport_solution(const DensityEstimate& f, const Diffeo& d) {
    if (f.grid.size() < 2)
        throw PreconditionError("a density estimate needs at least two grid nodes");

    std::vector<std::pair<double, double>> nodes;
    nodes.reserve(f.grid.size());
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
        double x = d.apply_inverse(f.grid[i]);
        if (!std::isfinite(x)) continue; // grid node at the far end of the target
        double v = std::fabs(d.slope(x)) * f.values[i];
        if (!std::isfinite(v)) continue;
        nodes.emplace_back(x, v);
    }
    std::sort(nodes.begin(), nodes.end());
    if (nodes.size() < 2)
        throw PreconditionError("transport produced fewer than two usable grid nodes");

    DensityEstimate out;
    double span = nodes.back().first - nodes.front().first;
    for (const auto& [x, v] : nodes) {
        if (!out.grid.empty() && x - out.grid.back() < 1e-12 * span) continue;
        out.grid.push_back(x);
        out.values.push_back(v);
    }
    out.l1_norm = abs_trapezoid(out.grid, out.values);
    out.construction = f.construction + "+transport";
    out.status = f.status;
    out.terms_used = f.terms_used;
    out.tail_estimate = f.tail_estimate;
    return out;
}

InverseTransportResult inverse_transport_solution(const DensityEstimate& f, const Diffeo& d) {
    if (f.grid.size() < 2)
        throw PreconditionError("a density estimate needs at least two grid nodes");

    std::vector<double> slopes(f.grid.size());
    double max_slope = 0.0;
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
        slopes[i] = std::fabs(d.slope(f.grid[i]));
        if (std::isfinite(slopes[i])) max_slope = std::max(max_slope, slopes[i]);
    }
    if (max_slope == 0.0) throw NumericError("the Jacobian vanished at every grid node");
    double cutoff = 1e-12 * max_slope;

    struct Node {
        double y, v;
        bool capped;
    };
    std::vector<Node> nodes;
    nodes.reserve(f.grid.size());
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
        double y = d.apply(f.grid[i]);
        if (!std::isfinite(y)) continue;
        double s = slopes[i];
        Node n{y, 0.0, false};
        if (std::isnan(s)) {
            n.capped = true;
        } else if (std::isinf(s)) {
            n.v = 0.0; // a genuine division by an unbounded Jacobian
        } else if (s < cutoff) {
            n.capped = true; // dividing by ~0 would manufacture spurious mass
        } else {
            n.v = f.values[i] / s;
            if (!std::isfinite(n.v)) {
                n.v = 0.0;
                n.capped = true;
            }
        }
        nodes.push_back(n);
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.y < b.y; });
    if (nodes.size() < 2)
        throw PreconditionError("inverse transport produced fewer than two usable grid nodes");

    InverseTransportResult out;
    double span = nodes.back().y - nodes.front().y;
    for (const Node& n : nodes) {
        if (!out.density.grid.empty() && n.y - out.density.grid.back() < 1e-12 * span) continue;
        out.density.grid.push_back(n.y);
        out.density.values.push_back(n.v);
        if (n.capped) out.capped_nodes.push_back(out.density.grid.size() - 1);
    }
    out.density.l1_norm = abs_trapezoid(out.density.grid, out.density.values);
    out.density.construction = f.construction + "+inverse-transport";
    out.density.status = f.status;
    out.density.terms_used = f.terms_used;
    out.density.tail_estimate = f.tail_estimate;
    return out;
}

namespace {

// Residual of the windowed equation for the zero-extended density: inside
// the window the full fixed-point defect, outside just |f| (the extension
// is supposed to vanish there, and the window maps do not extend).
double compact_residual(const DensityEstimate& f, const Problem& windowed, double lo, double hi,
                        std::size_t quad_points) {
    std::vector<double> nodes = uniform_grid(lo - 1.0, hi + 1.0, quad_points + 1);
    nodes.insert(nodes.end(), f.grid.begin(), f.grid.end());
    for (double b : windowed.g.breakpoints())
        if (b > lo && b < hi) nodes.push_back(b);
    nodes.push_back(lo);
    nodes.push_back(hi);
    std::sort(nodes.begin(), nodes.end());
    std::vector<double> xs, rs;
    xs.reserve(nodes.size());
    double tol = 1e-12 * (hi - lo + 2.0);
    for (double x : nodes) {
        if (!xs.empty() && x - xs.back() < tol) continue;
        xs.push_back(x);
    }
    rs.reserve(xs.size());
    for (double x : xs) {
        if (x > lo && x < hi) {
            double acc = f(x) - windowed.g(x);
            for (const MapAtom& atom : windowed.atoms)
                acc -= atom.weight() * std::fabs(atom.slope(x)) * f(atom.apply(x));
            rs.push_back(std::fabs(acc));
        } else {
            rs.push_back(std::fabs(f(x)));
        }
    }
    return trapezoid(xs, rs);
}

} // namespace

DensityEstimate compact_support_solve(const Problem& windowed, double lo, double hi,
                                      const Diffeo& d, const SolveParams& params) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ConfigError("the compact support window must be a bounded interval");
    Interval window(lo, hi);
    if (!same_interval(windowed.interval, window))
        throw ConfigError("the problem must be restricted to the window interior " +
                          window.to_string());
    if (!same_interval(d.source, window) || d.target.bounded_below() || d.target.bounded_above())
        throw ConfigError("the diffeomorphism must map the window interior onto the full line");
    validate_diffeo(d);

    // Work on the line, where the contraction hypotheses are actually
    // testable for a family pinned to a bounded window.
    Diffeo pull = invert_diffeo(d); // line -> window
    Problem conj = conjugate_problem(windowed, pull);
    FamilyValidation fam = validate_map_family(conj);
    if (!fam.pass) {
        std::string note = "map checks failed";
        for (const AtomValidation& a : fam.atoms)
            if (!a.pass) {
                note = a.note;
                break;
            }
        throw PreconditionError("conjugated map family failed validation: " + note);
    }

    ClosureExtendedProblem cep = extend_to_closure(conj);
    Antiderivative G = build_antiderivative(conj, params.grid_points);
    SignSplit split = classify_atoms(conj);
    CdfSolution F;
    if (split.minus_atoms.empty()) {
        F = solve_cdf_series(cep, G, params);
    } else {
        if (!conj.alpha_mass)
            throw PreconditionError(
                "decreasing maps are present, so the problem must carry alpha (the total mass)");
        F = solve_cdf_reflected(cep, G, *conj.alpha_mass, params);
    }
    DensityEstimate on_line = derive_density(F);
    InverseTransportResult pulled = inverse_transport_solution(on_line, pull);

    // Zero extension: explicit zero nodes outside the window and exactly at
    // its edges, so interpolation vanishes identically off [lo, hi].
    DensityEstimate out;
    double tol = 1e-12 * (hi - lo);
    for (double x : uniform_grid(lo - 1.0, lo, 17)) {
        out.grid.push_back(x);
        out.values.push_back(0.0);
    }
    for (std::size_t i = 0; i < pulled.density.grid.size(); ++i) {
        double x = pulled.density.grid[i];
        if (!(x > lo + tol && x < hi - tol)) continue;
        if (x - out.grid.back() < tol) continue;
        out.grid.push_back(x);
        out.values.push_back(pulled.density.values[i]);
    }
    for (double x : uniform_grid(hi, hi + 1.0, 17)) {
        out.grid.push_back(x);
        out.values.push_back(0.0);
    }

    out.l1_norm = abs_trapezoid(out.grid, out.values);
    out.construction = "compact-window(" + on_line.construction + ")";
    out.status = on_line.status;
    out.terms_used = on_line.terms_used;
    out.tail_estimate = on_line.tail_estimate;
    out.residual_l1 =
        compact_residual(out, windowed, lo, hi, 2 * static_cast<std::size_t>(params.grid_points));
    return out;
}

} // namespace refineq
