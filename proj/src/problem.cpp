#include "refineq/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refineq/grids.hpp"
#include "refineq/interp.hpp"
#include "refineq/quadrature.hpp"

namespace refineq {

MapAtom::MapAtom(double weight, Expr map, Expr derivative, Expr inverse)
    : weight_(weight), map_(std::move(map)), deriv_(std::move(derivative)),
      inverse_(std::move(inverse)) {
    if (!(weight_ > 0.0) || weight_ > 1.0)
        throw ConfigError("atom weight must lie in (0, 1]");
    if (!map_) throw ConfigError("atom needs a map expression");
    affine_ = is_affine(map_, &aff_slope_, &aff_intercept_);
}

double MapAtom::apply(double x) const {
    if (affine_) return aff_slope_ * x + aff_intercept_;
    return eval_expression(map_, x);
}

double MapAtom::slope(double x) const {
    if (deriv_) return eval_expression(deriv_, x);
    if (affine_) return aff_slope_;
    double h = 1e-6 * std::max(1.0, std::fabs(x));
    return (eval_expression(map_, x + h) - eval_expression(map_, x - h)) / (2.0 * h);
}

bool MapAtom::affine(double* slope_out, double* intercept_out) const {
    if (!affine_) return false;
    if (slope_out) *slope_out = aff_slope_;
    if (intercept_out) *intercept_out = aff_intercept_;
    return true;
}

Forcing::Forcing() : kind_("expression"), expr_(make_const(0.0)) {}

Forcing Forcing::from_expression(Expr e) {
    Forcing f;
    f.kind_ = "expression";
    f.expr_ = std::move(e);
    return f;
}

Forcing Forcing::from_expression_text(const std::string& src) {
    return from_expression(parse_expression(src, "t"));
}

Forcing Forcing::from_table(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) throw ConfigError("g table needs at least one row");
    std::sort(knots.begin(), knots.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        if (!(knots[i].first < knots[i + 1].first))
            throw ConfigError("g table has duplicate abscissae");
    Forcing f;
    f.kind_ = "table";
    f.expr_ = nullptr;
    f.table_ = std::move(knots);
    for (const auto& kv : f.table_) {
        f.table_t_.push_back(kv.first);
        f.table_v_.push_back(kv.second);
        f.breakpoints_.push_back(kv.first);
    }
    return f;
}

Forcing Forcing::from_callable(std::function<double(double)> fn,
                               std::vector<double> breakpoints) {
    Forcing f;
    f.kind_ = "native";
    f.expr_ = nullptr;
    f.callable_ = std::move(fn);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    f.breakpoints_ = std::move(breakpoints);
    return f;
}

double Forcing::operator()(double t) const {
    if (expr_) return eval_expression(expr_, t);
    if (callable_) return callable_(t);
    return linear_interp(table_t_, table_v_, t);
}

namespace {

// One |g| (and signed g) integral over [a, b], splitting at breakpoints.
std::pair<double, double> segment_masses(const Forcing& g, double a, double b) {
    QuadOptions opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-10;
    opt.max_cells = 2048;
    auto abs_r = integrate_with_breakpoints([&](double t) { return std::fabs(g(t)); }, a, b,
                                            g.breakpoints(), opt);
    auto sgn_r =
        integrate_with_breakpoints([&](double t) { return g(t); }, a, b, g.breakpoints(), opt);
    if (!std::isfinite(abs_r.value) || !std::isfinite(sgn_r.value))
        throw ConfigError("g is not absolutely integrable: the integral over [" +
                          std::to_string(a) + ", " + std::to_string(b) + "] is not finite");
    return {abs_r.value, sgn_r.value};
}

} // namespace

IntegrabilityReport scan_integrable(const Forcing& g, const Interval& iv) {
    IntegrabilityReport rep;

    if (g.kind() == "table") {
        double lo = std::max(iv.lo, g.table().front().first);
        double hi = std::min(iv.hi, g.table().back().first);
        if (lo < hi) {
            auto [am, sm] = segment_masses(g, lo, hi);
            rep.abs_mass = am;
            rep.signed_mass = sm;
        } else {
            lo = hi = 0.5 * (std::max(iv.lo, g.table().front().first) +
                             std::min(iv.hi, g.table().back().first));
        }
        rep.effective_lo = lo;
        rep.effective_hi = hi;
        return rep;
    }

    // Anchor segment in the interior.
    double c, w;
    if (iv.bounded()) {
        c = 0.5 * (iv.lo + iv.hi);
        w = 0.25 * iv.length();
    } else if (iv.bounded_below()) {
        c = iv.lo + 2.0;
        w = 1.0;
    } else if (iv.bounded_above()) {
        c = iv.hi - 2.0;
        w = 1.0;
    } else {
        c = 0.0;
        w = 1.0;
    }
    auto [am, sm] = segment_masses(g, c - w, c + w);
    rep.abs_mass = am;
    rep.signed_mass = sm;

    // Expand one side until the shell mass is negligible twice running.
    // A floor of 20 shells keeps support sitting away from the anchor from
    // being missed by two accidentally empty shells.
    const int min_shells = 20, max_shells = 60;
    auto expand = [&](bool toward_hi) -> double {
        double edge = toward_hi ? c + w : c - w;
        double last_active = edge; // outermost edge with non-negligible mass
        int quiet = 0;
        for (int k = 0; k < max_shells; ++k) {
            double next;
            if (toward_hi) {
                next = iv.bounded_above() ? iv.hi - 0.5 * (iv.hi - edge)
                                          : (edge >= 1.0 ? 2.0 * edge : edge + 1.0);
            } else {
                next = iv.bounded_below() ? iv.lo + 0.5 * (edge - iv.lo)
                                          : (edge <= -1.0 ? 2.0 * edge : edge - 1.0);
            }
            auto [sa, ss] = toward_hi ? segment_masses(g, edge, next)
                                      : segment_masses(g, next, edge);
            rep.abs_mass += sa;
            rep.signed_mass += ss;
            edge = next;
            if (sa <= 1e-12 * (1.0 + rep.abs_mass)) {
                ++quiet;
            } else {
                quiet = 0;
                last_active = edge;
            }
            if (quiet >= 2 && k + 1 >= min_shells) return last_active;
        }
        throw ConfigError("g is not integrable at the stated tolerance");
    };

    rep.effective_hi = expand(true);
    rep.effective_lo = expand(false);
    return rep;
}

void check_weights(const std::vector<MapAtom>& atoms) {
    if (atoms.empty()) throw ConfigError("problem needs at least one atom");
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight();
    if (std::fabs(s - 1.0) > 1e-12)
        throw ConfigError("atom weights must sum to 1 (got " + std::to_string(s) + ")");
}

FamilyValidation validate_map_family(const Problem& problem, int probes) {
    if (probes < 16) throw PreconditionError("validate_map_family needs probes >= 16");
    const Interval& iv = problem.interval;
    auto grid = probe_grid(iv, static_cast<std::size_t>(probes));

    FamilyValidation out;
    out.pass = true;
    for (const auto& atom : problem.atoms) {
        AtomValidation v;
        std::string note;

        std::vector<double> vals(grid.size());
        bool finite_ok = true, inside_ok = true;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            vals[i] = atom.apply(grid[i]);
            if (!std::isfinite(vals[i])) finite_ok = false;
            else if (!iv.contains(vals[i])) inside_ok = false;
        }
        v.maps_into = finite_ok && inside_ok;
        if (!finite_ok) note += "map not finite at a probe; ";
        else if (!inside_ok) note += "map leaves the interval at a probe; ";

        bool inc = true, dec = true;
        for (std::size_t i = 1; i < vals.size(); ++i) {
            if (!(vals[i] > vals[i - 1])) inc = false;
            if (!(vals[i] < vals[i - 1])) dec = false;
        }
        v.monotone = finite_ok && (inc || dec);
        v.increasing = inc;
        if (!v.monotone) note += "map is not strictly monotone on probes; ";

        bool dsign_ok = true, dmatch_ok = true;
        double first_sign = 0.0;
        for (double x : grid) {
            double s = atom.slope(x);
            if (!std::isfinite(s) || s == 0.0) {
                dsign_ok = false;
                break;
            }
            double sg = s > 0 ? 1.0 : -1.0;
            if (first_sign == 0.0) first_sign = sg;
            else if (sg != first_sign) {
                dsign_ok = false;
                break;
            }
            if (atom.has_derivative_expr()) {
                double h = 1e-6 * std::max(1.0, std::fabs(x));
                double cd = (atom.apply(x + h) - atom.apply(x - h)) / (2.0 * h);
                double tol = 1e-6 * std::max(1.0, std::fabs(s));
                if (std::fabs(s - cd) > tol) {
                    // Steep curvature near an endpoint (square-root-type
                    // boundary behavior of conjugated maps) limits the plain
                    // stencil; Richardson extrapolation of the halved step
                    // separates truncation error from a wrong expression.
                    double ch = (atom.apply(x + 0.5 * h) - atom.apply(x - 0.5 * h)) / h;
                    if (std::fabs(s - (4.0 * ch - cd) / 3.0) > tol) dmatch_ok = false;
                }
            }
        }
        v.derivative_nonvanishing = dsign_ok;
        v.derivative_matches = dmatch_ok;
        if (!dsign_ok) note += "derivative vanishes or changes sign; ";
        if (!dmatch_ok) note += "stated derivative disagrees with central differences; ";

        if (atom.has_inverse_expr()) {
            for (double y : vals) {
                if (!std::isfinite(y)) continue;
                double back = atom.apply(eval_expression(atom.inverse_expr(), y));
                if (std::fabs(back - y) > 1e-9 * std::max(1.0, std::fabs(y))) {
                    v.inverse_matches = false;
                    note += "stated inverse fails the round trip; ";
                    break;
                }
            }
        }

        // Endpoint-limit behavior (heuristic onto check).
        auto limit_reaches = [&](bool toward_hi) {
            auto xs = approach_sequence(iv, toward_hi, 12);
            std::vector<double> ms;
            for (double x : xs) ms.push_back(atom.apply(x));
            bool image_hi = (toward_hi == inc); // increasing maps preserve ends
            double target = image_hi ? iv.hi : iv.lo;
            if (std::isfinite(target)) {
                double d_first = std::fabs(ms.front() - target);
                double d_last = std::fabs(ms.back() - target);
                if (!std::isfinite(d_last)) return false;
                return d_last == 0.0 || d_last <= 0.05 * std::max(d_first, 1e-300);
            }
            double m_first = std::fabs(ms.front()), m_last = std::fabs(ms.back());
            if (!std::isfinite(ms.back())) return true; // overflowed toward the target
            bool right_direction = image_hi ? ms.back() > ms.front() : ms.back() < ms.front();
            return right_direction && m_last >= 10.0 * m_first + 1.0;
        };
        v.onto_heuristic = v.monotone && limit_reaches(true) && limit_reaches(false);
        if (v.monotone && !v.onto_heuristic)
            note += "endpoint limits do not reach the interval ends (onto check, heuristic); ";

        v.pass = v.monotone && v.derivative_nonvanishing && v.derivative_matches &&
                 v.inverse_matches && v.maps_into && v.onto_heuristic;
        if (v.pass) note = "pass (onto verified heuristically)";
        else if (!note.empty()) note.erase(note.size() - 2); // trailing "; "
        v.note = note;
        out.atoms.push_back(std::move(v));
        out.pass = out.pass && out.atoms.back().pass;
    }
    return out;
}

SignSplit classify_atoms(const Problem& problem, const std::vector<double>& probe_points) {
    if (probe_points.empty()) throw PreconditionError("classify_atoms needs probe points");
    SignSplit split;
    for (std::size_t i = 0; i < problem.atoms.size(); ++i) {
        const auto& atom = problem.atoms[i];
        double first_sign = 0.0;
        double first_probe = probe_points.front();
        for (double x : probe_points) {
            double s = atom.slope(x);
            if (!std::isfinite(s) || s == 0.0)
                throw PreconditionError("derivative of atom " + std::to_string(i) +
                                        " vanishes or is not finite at probe " +
                                        std::to_string(x));
            double sg = s > 0 ? 1.0 : -1.0;
            if (first_sign == 0.0) {
                first_sign = sg;
            } else if (sg != first_sign) {
                throw PreconditionError(
                    "derivative sign of atom " + std::to_string(i) + " differs between probes " +
                    std::to_string(first_probe) + " and " + std::to_string(x));
            }
        }
        if (first_sign > 0) {
            split.plus_atoms.push_back(i);
            split.p_plus += atom.weight();
        } else {
            split.minus_atoms.push_back(i);
        }
    }
    return split;
}

SignSplit classify_atoms(const Problem& problem) {
    return classify_atoms(problem, probe_grid(problem.interval, 33));
}

double ClosureExtendedProblem::apply_closure(double x, std::size_t atom_index) const {
    const Interval& iv = base.interval;
    if (iv.bounded_below() && x == iv.lo) return boundary[atom_index].at_lo;
    if (iv.bounded_above() && x == iv.hi) return boundary[atom_index].at_hi;
    double y = base.atoms[atom_index].apply(x);
    return iv.clamp_to_closure(y);
}

ClosureExtendedProblem extend_to_closure(const Problem& problem) {
    ClosureExtendedProblem out;
    out.base = problem;
    out.boundary.assign(problem.atoms.size(), {});
    const Interval& iv = problem.interval;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto& b : out.boundary) b = {nan, nan};

    auto one_sided_limit = [&](const MapAtom& atom, bool toward_hi) {
        auto xs = approach_sequence(iv, toward_hi, 48);
        std::vector<double> vals;
        for (double x : xs) {
            double v = atom.apply(x);
            if (!std::isfinite(v))
                throw PreconditionError(
                    "one-sided limit of a map at a finite endpoint is not finite; "
                    "the closure extension requires finite boundary limits");
            vals.push_back(v);
        }
        // Aitken extrapolation along the geometric approach: exact for any
        // value sequence L + C*r^k, which covers maps that are merely
        // Hoelder at the endpoint (conjugated families approach like sqrt).
        auto aitken = [&](std::size_t k) {
            double d1 = vals[k] - vals[k - 1];
            double d2 = vals[k] - 2.0 * vals[k - 1] + vals[k - 2];
            return std::fabs(d2) < 1e-300 ? vals[k] : vals[k] - d1 * d1 / d2;
        };
        double prev_extrap = aitken(vals.size() - 2);
        double extrap = aitken(vals.size() - 1);
        double residual = std::fabs(vals.back() - extrap);
        if (!std::isfinite(extrap) ||
            std::fabs(extrap - prev_extrap) > 1e-7 * std::max(1.0, std::fabs(extrap)) ||
            residual > 1e-5 * std::max({1.0, std::fabs(vals.back()), std::fabs(extrap)}))
            throw PreconditionError(
                "one-sided limit of a map at a finite endpoint is not finite; "
                "the closure extension requires finite boundary limits");
        double scale = std::max({1.0, std::fabs(iv.lo), std::fabs(iv.hi)});
        if (std::isfinite(iv.lo) && std::fabs(extrap - iv.lo) <= 1e-6 * scale) return iv.lo;
        if (std::isfinite(iv.hi) && std::fabs(extrap - iv.hi) <= 1e-6 * scale) return iv.hi;
        throw PreconditionError("one-sided limit of a map at a finite endpoint falls in the "
                                "interior; the map is not onto the interval");
    };

    for (std::size_t i = 0; i < problem.atoms.size(); ++i) {
        if (iv.bounded_below()) out.boundary[i].at_lo = one_sided_limit(problem.atoms[i], false);
        if (iv.bounded_above()) out.boundary[i].at_hi = one_sided_limit(problem.atoms[i], true);
    }
    return out;
}

double invert_map(const MapAtom& atom, double y, const Interval& iv) {
    if (atom.has_inverse_expr()) return eval_expression(atom.inverse_expr(), y);
    double a, b;
    if (atom.affine(&a, &b)) return (y - b) / a;

    // Monotone bracketing on a probe cover, then bisection.
    std::vector<double> xs = probe_grid(iv, 129);
    {
        auto more = approach_sequence(iv, false, 40);
        xs.insert(xs.end(), more.begin(), more.end());
        more = approach_sequence(iv, true, 40);
        xs.insert(xs.end(), more.begin(), more.end());
        std::sort(xs.begin(), xs.end());
    }
    double lo = 0, hi = 0;
    bool found = false;
    double prev_x = xs.front(), prev_r = atom.apply(prev_x) - y;
    for (std::size_t i = 1; i < xs.size() && !found; ++i) {
        double r = atom.apply(xs[i]) - y;
        if (prev_r == 0.0) return prev_x;
        if ((prev_r < 0) != (r < 0)) {
            lo = prev_x;
            hi = xs[i];
            found = true;
        }
        prev_x = xs[i];
        prev_r = r;
    }
    if (!found) throw NumericError("could not bracket a preimage inside the interval");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double r = atom.apply(mid) - y;
        double rlo = atom.apply(lo) - y;
        if ((rlo < 0) == (r < 0)) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace refineq
