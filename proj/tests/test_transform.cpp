#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "refineq/errors.hpp"
#include "refineq/grids.hpp"
#include "refineq/hypotheses.hpp"
#include "refineq/interp.hpp"
#include "refineq/problem.hpp"
#include "refineq/quadrature.hpp"
#include "refineq/solver.hpp"
#include "refineq/transform.hpp"

using namespace refineq;

namespace {

const double kInf = std::numeric_limits<double>::infinity();
const Interval kLine(-kInf, kInf);
const Interval kUnit(0.0, 1.0);

MapAtom atom(double w, const char* map) { return MapAtom(w, parse_expression(map)); }

double box(double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; }

PointwiseDensity box_density() { return PointwiseDensity{box, {0.0, 1.0}}; }

Problem halving_problem() {
    Problem p;
    p.label = "halving";
    p.interval = kLine;
    p.atoms = {atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")};
    auto pair = manufacture_forcing(p, box_density(), 512);
    p.g = pair.g_exact;
    return p;
}

double logistic_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit_fn(double u) { return std::log(u / (1.0 - u)); }

// x -> a.forward(b.forward(x)); requires b.target == a.source.
Diffeo compose(const Diffeo& a, const Diffeo& b) {
    Diffeo g;
    g.source = b.source;
    g.target = a.target;
    g.forward = substitute(a.forward, b.forward);
    g.inverse = substitute(b.inverse, a.inverse);
    g.derivative =
        make_bin(ExprNode::BinOp::Mul, substitute(a.derivative, b.forward), b.derivative);
    return g;
}

} // namespace

TEST_CASE("builtin diffeo: logistic from the line to the unit interval") {
    Diffeo d = builtin_diffeo("logistic", kLine, kUnit);
    CHECK(d.apply(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.apply_inverse(0.25) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
    CHECK(d.slope(0.0) == doctest::Approx(0.25).epsilon(1e-15));
    for (double x : {-7.0, -1.3, 0.4, 2.0, 9.0}) {
        double s = d.apply(x);
        CHECK(d.slope(x) == doctest::Approx(s * (1.0 - s)).epsilon(1e-13));
    }
    // stays finite far out instead of overflowing through exp
    CHECK(d.slope(800.0) == 0.0);
    CHECK(d.slope(-800.0) == 0.0);
    CHECK_NOTHROW(validate_diffeo(d));
}

TEST_CASE("builtin diffeo: logistic onto a shifted target") {
    Diffeo d = builtin_diffeo("logistic", kLine, Interval(-2.0, 3.0));
    CHECK(d.apply(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.apply_inverse(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(d.slope(0.0) == doctest::Approx(1.25).epsilon(1e-14));
    CHECK_NOTHROW(validate_diffeo(d));
    CHECK_THROWS_AS(builtin_diffeo("logistic", kUnit, kUnit), ConfigError);
    CHECK_THROWS_AS(builtin_diffeo("logistic", kLine, Interval(0.0, kInf)), ConfigError);
}

TEST_CASE("builtin diffeo: tan_half from the unit interval to the line") {
    Diffeo d = builtin_diffeo("tan_half", kUnit, kLine);
    CHECK(d.apply(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.apply(0.75) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d.slope(0.5) == doctest::Approx(M_PI).epsilon(1e-14));
    CHECK(d.apply_inverse(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.apply_inverse(1.0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_NOTHROW(validate_diffeo(d));
    CHECK_THROWS_AS(builtin_diffeo("tan_half", kLine, kLine), ConfigError);
    CHECK_THROWS_AS(builtin_diffeo("tan_half", kUnit, kUnit), ConfigError);
}

TEST_CASE("builtin diffeo: affine charts between same-shape intervals") {
    Diffeo d = builtin_diffeo("affine", kUnit, Interval(2.0, 4.0));
    CHECK(d.apply(0.5) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(d.slope(0.3) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(d.apply_inverse(3.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_NOTHROW(validate_diffeo(d));

    Diffeo ray = builtin_diffeo("affine", Interval(0.0, kInf), Interval(1.0, kInf));
    CHECK(ray.apply(2.0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK_NOTHROW(validate_diffeo(ray));

    Diffeo line = builtin_diffeo("affine", kLine, kLine);
    CHECK(line.apply(-3.7) == doctest::Approx(-3.7).epsilon(1e-15));
    CHECK(line.slope(11.0) == doctest::Approx(1.0));

    Diffeo flip = builtin_diffeo("affine", Interval(0.0, kInf), Interval(-kInf, 5.0));
    CHECK(flip.apply(1.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(flip.slope(1.0) == doctest::Approx(-1.0));
    CHECK_NOTHROW(validate_diffeo(flip));

    CHECK_THROWS_AS(builtin_diffeo("affine", kUnit, kLine), ConfigError);
    CHECK_THROWS_AS(builtin_diffeo("affine", Interval(0.0, kInf), kUnit), ConfigError);
    CHECK_THROWS_AS(builtin_diffeo("mercator", kUnit, kLine), ConfigError);
}

TEST_CASE("invert_diffeo swaps the charts and applies the inverse-function rule") {
    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    Diffeo logit = invert_diffeo(sigma);
    CHECK(logit.source.lo == 0.0);
    CHECK(logit.source.hi == 1.0);
    CHECK(!std::isfinite(logit.target.lo));
    CHECK(logit.apply(0.25) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
    CHECK(logit.slope(0.5) == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(logit.slope(0.25) == doctest::Approx(16.0 / 3.0).epsilon(1e-13));
    CHECK_NOTHROW(validate_diffeo(logit));

    Diffeo back = invert_diffeo(logit);
    for (double x : {-4.0, -0.5, 0.0, 1.7, 6.0}) {
        CHECK(back.apply(x) == doctest::Approx(sigma.apply(x)).epsilon(1e-13));
        CHECK(back.slope(x) == doctest::Approx(sigma.slope(x)).epsilon(1e-11));
    }
}

TEST_CASE("validate_diffeo rejects inconsistent charts") {
    Diffeo bad = builtin_diffeo("logistic", kLine, kUnit);
    bad.derivative = parse_expression("1");
    CHECK_THROWS_AS(validate_diffeo(bad), ConfigError);

    Diffeo wrong_inverse = builtin_diffeo("logistic", kLine, kUnit);
    wrong_inverse.inverse = parse_expression("x");
    CHECK_THROWS_AS(validate_diffeo(wrong_inverse), ConfigError);

    Diffeo off_target = builtin_diffeo("affine", kUnit, kUnit);
    off_target.forward = parse_expression("x + 2");
    CHECK_THROWS_AS(validate_diffeo(off_target), ConfigError);
}

TEST_CASE("conjugation: three-step map composition on the unit interval") {
    Problem p;
    p.label = "square";
    p.interval = kUnit;
    p.atoms = {MapAtom(1.0, parse_expression("x^2"), parse_expression("2*x"),
                       parse_expression("sqrt(x)"))};
    p.g = Forcing::from_expression_text("1");

    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    Problem conj = conjugate_problem(p, sigma);
    CHECK(!std::isfinite(conj.interval.lo));
    CHECK(!std::isfinite(conj.interval.hi));

    // 0 -> sigma -> 0.5 -> square -> 0.25 -> logit -> log(1/3)
    double image = conj.atoms[0].apply(0.0);
    CHECK(image == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-13));

    // chain rule: m'(0.5) * sigma'(0) / sigma'(log 1/3) = 1 * 0.25 / 0.1875
    REQUIRE(conj.atoms[0].has_derivative_expr());
    CHECK(conj.atoms[0].slope(0.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    for (double x : {-2.0, -0.3, 0.9, 3.0}) {
        double h = 1e-6 * std::max(1.0, std::fabs(x));
        double diff = (conj.atoms[0].apply(x + h) - conj.atoms[0].apply(x - h)) / (2.0 * h);
        CHECK(conj.atoms[0].slope(x) == doctest::Approx(diff).epsilon(1e-5));
    }

    REQUIRE(conj.atoms[0].has_inverse_expr());
    CHECK(eval_expression(conj.atoms[0].inverse_expr(), image) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // the flat forcing picks up exactly the logistic Jacobian
    CHECK(conj.g.kind() == "expression");
    CHECK(conj.g(0.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(conj.g_report.abs_mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("conjugation: the identity chart leaves the problem unchanged") {
    Problem p = halving_problem();
    p.alpha_mass = 1.0;
    p.solver.grid_points = 777;
    Diffeo id = builtin_diffeo("affine", kLine, kLine);
    Problem same = conjugate_problem(p, id);

    REQUIRE(same.atoms.size() == 2);
    CHECK(same.alpha_mass.has_value());
    CHECK(*same.alpha_mass == 1.0);
    CHECK(same.solver.grid_points == 777);
    for (double x : {-3.0, -0.4, 0.0, 0.6, 2.5}) {
        CHECK(same.atoms[0].apply(x) == doctest::Approx(0.5 * x).epsilon(1e-14));
        CHECK(same.atoms[1].apply(x) == doctest::Approx(0.5 * x + 0.5).epsilon(1e-14));
        CHECK(same.g(x) == doctest::Approx(p.g(x)).epsilon(1e-14));
    }
    CHECK(same.atoms[0].weight() == doctest::Approx(0.5));
}

TEST_CASE("conjugation: sigma conjugates of the halving maps return to the line") {
    Problem dyadic = halving_problem();
    Diffeo chart = invert_diffeo(builtin_diffeo("logistic", kLine, kUnit)); // (0,1) -> line

    Problem windowed = conjugate_problem(dyadic, chart);
    CHECK(windowed.interval.lo == 0.0);
    CHECK(windowed.interval.hi == 1.0);
    CHECK(windowed.atoms[0].apply(0.5) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(windowed.atoms[1].apply(0.5) ==
          doctest::Approx(logistic_fn(0.5)).epsilon(1e-13)); // 0.62245933120185459
    // |logit'(1/2)| * g(0) = 4 * 0.5
    CHECK(windowed.g(0.5) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(windowed.g.kind() == "native");
    REQUIRE(windowed.g.breakpoints().size() == 4);
    CHECK(windowed.g.breakpoints()[0] == doctest::Approx(logistic_fn(-1.0)).epsilon(1e-13));
    CHECK(windowed.g.breakpoints()[3] == doctest::Approx(logistic_fn(2.0)).epsilon(1e-13));

    Problem recovered = conjugate_problem(windowed, builtin_diffeo("logistic", kLine, kUnit));
    for (double t : {-6.0, -2.5, -1.0, 0.0, 0.3, 1.0, 2.2, 6.0}) {
        CHECK(std::fabs(recovered.atoms[0].apply(t) - 0.5 * t) <= 1e-9 * std::max(1.0, std::fabs(t)));
        CHECK(std::fabs(recovered.atoms[1].apply(t) - (0.5 * t + 0.5)) <=
              1e-9 * std::max(1.0, std::fabs(t)));
    }
    // probe g away from its jump points: the chart round trip perturbs the
    // argument by one ulp, which flips the side of a discontinuity
    for (double t : {-6.0, -2.5, -0.9, -0.3, 0.4, 1.1, 1.9, 2.5, 6.0})
        CHECK(std::fabs(recovered.g(t) - dyadic.g(t)) <= 1e-9);
}

TEST_CASE("conjugation: composing charts equals conjugating once") {
    Problem p;
    p.label = "gauss";
    p.interval = kLine;
    p.atoms = {atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")};
    p.g = Forcing::from_expression_text("exp(-(t^2))");

    Diffeo alpha = invert_diffeo(builtin_diffeo("logistic", kLine, kUnit)); // (0,1) -> line
    Diffeo beta = builtin_diffeo("affine", Interval(5.0, 7.0), kUnit);      // (5,7) -> (0,1)
    Problem two_step = conjugate_problem(conjugate_problem(p, alpha), beta);
    Problem one_step = conjugate_problem(p, compose(alpha, beta));

    for (double x : chebyshev_grid(5.0, 7.0, 21)) {
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(std::fabs(two_step.atoms[i].apply(x) - one_step.atoms[i].apply(x)) <= 1e-9);
        CHECK(std::fabs(two_step.g(x) - one_step.g(x)) <=
              1e-9 * std::max(1.0, std::fabs(one_step.g(x))));
    }
}

TEST_CASE("transport: a flat density picks up the logistic Jacobian") {
    DensityEstimate flat;
    flat.grid = uniform_grid(0.0, 1.0, 257);
    flat.values.assign(flat.grid.size(), 1.0);
    flat.construction = "flat";
    flat.status = DensityStatus::Ok;

    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    DensityEstimate moved = transport_solution(flat, sigma);

    // the endpoint nodes 0 and 1 have no finite preimage
    CHECK(moved.grid.size() == flat.grid.size() - 2);
    CHECK(std::is_sorted(moved.grid.begin(), moved.grid.end()));
    CHECK(moved(0.0) == doctest::Approx(0.25).epsilon(1e-13));
    for (std::size_t i = 0; i < moved.grid.size(); i += 50) {
        double s = logistic_fn(moved.grid[i]);
        CHECK(moved.values[i] == doctest::Approx(s * (1.0 - s)).epsilon(1e-12));
    }
    CHECK(moved.l1_norm == doctest::Approx(1.0).epsilon(0.01));
    CHECK(moved.construction == "flat+transport");
    CHECK(moved.status == DensityStatus::Ok);
}

TEST_CASE("transport and inverse transport are mutually inverse") {
    DensityEstimate flat;
    flat.grid = uniform_grid(0.0, 1.0, 257);
    flat.values.assign(flat.grid.size(), 1.0);
    flat.construction = "flat";

    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    DensityEstimate moved = transport_solution(flat, sigma);
    InverseTransportResult back = inverse_transport_solution(moved, sigma);

    CHECK(back.capped_nodes.empty());
    std::vector<double> ones(back.density.grid.size(), 1.0);
    CHECK(l1_distance(back.density.grid, back.density.values, ones) <= 1e-8);
    for (double v : back.density.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(back.density.construction == "flat+transport+inverse-transport");
}

TEST_CASE("inverse transport: the logistic derivative pulls back to one") {
    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    DensityEstimate fline;
    fline.grid = uniform_grid(-8.0, 8.0, 513);
    for (double x : fline.grid) {
        double s = logistic_fn(x);
        fline.values.push_back(s * (1.0 - s));
    }
    fline.construction = "sigma-prime";

    InverseTransportResult res = inverse_transport_solution(fline, sigma);
    CHECK(res.capped_nodes.empty());
    for (std::size_t i = 0; i < res.density.grid.size(); i += 40)
        CHECK(res.density.values[i] == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("inverse transport caps nodes where the Jacobian underflows") {
    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    DensityEstimate fline;
    fline.grid = uniform_grid(-40.0, 40.0, 161);
    fline.values.assign(fline.grid.size(), 1.0);
    fline.construction = "flat-wide";

    InverseTransportResult res = inverse_transport_solution(fline, sigma);
    REQUIRE(!res.capped_nodes.empty());
    for (std::size_t idx : res.capped_nodes) {
        REQUIRE(idx < res.density.grid.size());
        CHECK(res.density.values[idx] == 0.0);
    }
    // the saturated left tail collapses to a single capped node at the edge
    CHECK(res.capped_nodes.front() == 0);
}

TEST_CASE("transport preserves the total integral under change-of-variables quadrature") {
    DensityEstimate f;
    f.grid = uniform_grid(0.0, 1.0, 129);
    for (double u : f.grid) f.values.push_back(std::sin(M_PI * u));
    double exact = trapezoid(f.grid, f.values); // the table is piecewise linear

    Diffeo sigma = builtin_diffeo("logistic", kLine, kUnit);
    auto transported = [&](double x) {
        double s = sigma.slope(x);
        if (s == 0.0) return 0.0;
        return s * linear_interp(f.grid, f.values, sigma.apply(x));
    };
    std::vector<double> knots;
    for (double u : f.grid)
        if (u > 0.0 && u < 1.0) knots.push_back(logit_fn(u));
    QuadOptions opt;
    opt.abs_tol = 1e-12;
    opt.rel_tol = 1e-12;
    opt.max_cells = 1 << 15;
    QuadResult q = integrate_with_breakpoints(transported, -40.0, 40.0, knots, opt);
    REQUIRE(q.converged);
    CHECK(std::fabs(q.value - exact) <= 1e-9 * std::max(1.0, exact));
}

TEST_CASE("conjugation carries the residual up to discretization") {
    Problem dyadic = halving_problem();
    ClosureExtendedProblem cep = extend_to_closure(dyadic);
    SolveParams params;
    params.window = Window{-1.1, 2.1, "fixed"};
    DensityEstimate direct = cascade_iterate(cep, params);
    REQUIRE(direct.residual_l1.has_value());
    double r_line = *direct.residual_l1;

    Diffeo chart = invert_diffeo(builtin_diffeo("logistic", kLine, kUnit)); // (0,1) -> line
    DensityEstimate moved = transport_solution(direct, chart);
    Problem windowed = conjugate_problem(dyadic, chart);
    double r_window = residual_refinement(moved, windowed, 8192);
    CHECK(r_window <= r_line + 5e-3);
}

TEST_CASE("compact support solve: zero outside the window, box Jacobian inside") {
    Problem dyadic = halving_problem();
    Diffeo chart = invert_diffeo(builtin_diffeo("logistic", kLine, kUnit)); // (0,1) -> line
    Problem windowed = conjugate_problem(dyadic, chart);

    SolveParams params;
    params.window = Window{-1.1, 2.1, "fixed"};
    DensityEstimate out = compact_support_solve(windowed, 0.0, 1.0, chart, params);

    CHECK(out.grid.front() == doctest::Approx(-1.0));
    CHECK(out.grid.back() == doctest::Approx(2.0));
    CHECK(out(-0.5) == 0.0);
    CHECK(out(-10.0) == 0.0);
    CHECK(out(1.0) == 0.0);
    CHECK(out(1.5) == 0.0);
    CHECK(out(10.0) == 0.0);
    CHECK(out.status == DensityStatus::Ok);
    CHECK(out.construction.rfind("compact-window(", 0) == 0);

    // truth: the box density carried into the window, box(logit u) / (u(1-u))
    auto truth = [](double u) {
        if (!(u > 0.0 && u < 1.0)) return 0.0;
        return box(logit_fn(u)) / (u * (1.0 - u));
    };
    auto probe = uniform_grid(1e-3, 1.0 - 1e-3, 4001);
    std::vector<double> err(probe.size());
    for (std::size_t i = 0; i < probe.size(); ++i) err[i] = std::fabs(out(probe[i]) - truth(probe[i]));
    CHECK(trapezoid(probe, err) <= 0.05);

    REQUIRE(out.residual_l1.has_value());
    CHECK(*out.residual_l1 <= 0.05);
}

TEST_CASE("compact support solve rejects mismatched windows and charts") {
    Problem dyadic = halving_problem();
    Diffeo chart = invert_diffeo(builtin_diffeo("logistic", kLine, kUnit));
    Problem windowed = conjugate_problem(dyadic, chart);
    SolveParams params;

    CHECK_THROWS_AS(compact_support_solve(windowed, 0.0, 2.0, chart, params), ConfigError);
    CHECK_THROWS_AS(compact_support_solve(windowed, 0.0, kInf, chart, params), ConfigError);
    Diffeo wrong_source = builtin_diffeo("logistic", kLine, kUnit); // line -> (0,1)
    CHECK_THROWS_AS(compact_support_solve(windowed, 0.0, 1.0, wrong_source, params), ConfigError);
}
