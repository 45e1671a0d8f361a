#include <cmath>
#include <limits>

#include "doctest.h"
#include "refineq/grids.hpp"
#include "refineq/hypotheses.hpp"
#include "refineq/iterate.hpp"
#include "refineq/problem.hpp"

using namespace refineq;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Problem make_problem(std::vector<MapAtom> atoms, Forcing g,
                     Interval iv = Interval(-kInf, kInf)) {
    Problem p;
    p.label = "test";
    p.interval = iv;
    p.atoms = std::move(atoms);
    p.g = std::move(g);
    return p;
}

MapAtom atom(double w, const char* map) { return MapAtom(w, parse_expression(map)); }

// Piecewise-constant forcing manufactured by hand from the halving pair and
// the unit-box density: +1 on [0,1], minus a quarter on [0,2] and [-1,1].
Forcing box_pair_forcing() {
    auto g = [](double x) {
        double acc = 0.0;
        if (x >= 0.0 && x <= 1.0) acc += 1.0;
        if (x >= 0.0 && x <= 2.0) acc -= 0.25;
        if (x >= -1.0 && x <= 1.0) acc -= 0.25;
        return acc;
    };
    return Forcing::from_callable(g, {-1.0, 0.0, 1.0, 2.0});
}

} // namespace

TEST_CASE("contraction factor: affine families get the exact weighted slope sum") {
    auto p = make_problem({atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")}, Forcing{});
    auto rep = estimate_contraction_factor(p, 200, 7);
    REQUIRE(rep.analytic_l.has_value());
    CHECK(*rep.analytic_l == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(rep.sampled_l - *rep.analytic_l) <= 1e-9);
    CHECK(rep.pass);

    auto mixed = make_problem({atom(0.3, "0.9*x"), atom(0.7, "-0.2*x + 1")}, Forcing{});
    auto mrep = estimate_contraction_factor(mixed, 500, 11);
    CHECK(*mrep.analytic_l == doctest::Approx(0.41).epsilon(1e-15));
    CHECK(std::abs(mrep.sampled_l - 0.41) <= 1e-9);
    CHECK(mrep.pass);
}

TEST_CASE("contraction factor: the identity map is not a contraction") {
    auto p = make_problem({atom(1.0, "x")}, Forcing{});
    auto rep = estimate_contraction_factor(p, 100, 3);
    CHECK(*rep.analytic_l == doctest::Approx(1.0));
    CHECK(rep.sampled_l == doctest::Approx(1.0));
    CHECK_FALSE(rep.pass);
}

TEST_CASE("contraction factor: nonlinear map is sampled, no analytic value") {
    auto p = make_problem({atom(1.0, "x/2 + sin(x)/4")}, Forcing{});
    auto rep = estimate_contraction_factor(p, 400, 5);
    CHECK_FALSE(rep.analytic_l.has_value());
    CHECK(rep.sampled_l > 0.25);
    CHECK(rep.sampled_l <= 0.75 + 1e-12);
    CHECK(rep.pass);
}

TEST_CASE("contraction factor: too few probe pairs are rejected") {
    auto p = make_problem({atom(1.0, "x/2")}, Forcing{});
    CHECK_THROWS_AS(estimate_contraction_factor(p, 99, 1), PreconditionError);
}

TEST_CASE("contraction factor: same seed, same report") {
    auto p = make_problem({atom(1.0, "x/2 + sin(x)/4")}, Forcing{});
    auto a = estimate_contraction_factor(p, 300, 42);
    auto b = estimate_contraction_factor(p, 300, 42);
    CHECK(a.sampled_l == b.sampled_l);
    auto c = estimate_contraction_factor(p, 300, 43);
    CHECK(a.sampled_l != c.sampled_l);
}

TEST_CASE("displacement: halving pair at x = 4 gives exactly 1.75") {
    auto p = make_problem({atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")}, Forcing{});
    auto rep = check_displacement_integrability(p, {0.0, 4.0});
    REQUIRE(rep.values.size() == 2);
    CHECK(rep.values[0] == doctest::Approx(0.25).epsilon(1e-15)); // 0.5*0 + 0.5*0.5
    CHECK(rep.values[1] == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(rep.pass);
    CHECK(rep.note.empty());
}

TEST_CASE("displacement: NaN in a map is reported with its location") {
    auto p = make_problem({atom(1.0, "log(x)")}, Forcing{});
    auto rep = check_displacement_integrability(p, {2.0, -1.0});
    CHECK_FALSE(rep.pass);
    CHECK(rep.note.find("not finite") != std::string::npos);
    CHECK(rep.note.find("-1") != std::string::npos);
}

TEST_CASE("antiderivative of the unit box is the clamp function") {
    auto p = make_problem({atom(1.0, "x/2")},
                          Forcing::from_table({{0.0, 1.0}, {1.0, 1.0}}));
    auto G = build_antiderivative(p, 128);
    CHECK(G.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(G.abs_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(G(0.25) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(G(0.5) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(G(-5.0) == 0.0);
    CHECK(G(7.0) == doctest::Approx(G.total_mass()).epsilon(1e-12));
    // value at the upper grid end equals the total mass
    CHECK(G.values().back() == doctest::Approx(G.total_mass()).epsilon(1e-15));
    CHECK(build_antiderivative(p, 128).grid() == G.grid()); // deterministic
    CHECK_THROWS_AS(build_antiderivative(p, 32), PreconditionError);
}

TEST_CASE("antiderivative of a tilted ramp on (0,1): masses and Lipschitz node") {
    auto p = make_problem({atom(1.0, "x/2")}, Forcing::from_expression_text("t - 1/3"),
                          Interval(0.0, 1.0));
    auto G = build_antiderivative(p, 256);
    CHECK(G.total_mass() == doctest::Approx(1.0 / 6.0).epsilon(1e-8));
    CHECK(G.abs_mass() == doctest::Approx(5.0 / 18.0).epsilon(1e-8));
    CHECK(G(1.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-8));
    // minimum of G sits where g crosses zero (the interpolant flattens its
    // slope at the turning node, so only grid-scale accuracy holds here)
    CHECK(G(1.0 / 3.0) == doctest::Approx(-1.0 / 18.0).epsilon(1e-3));

    auto lip = estimate_lipschitz(G);
    CHECK(lip.value == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(lip.at == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("antiderivative is Lipschitz with the estimated constant") {
    // Piecewise-linear G (box forcing): the tabulated interpolant is exact,
    // so the bound holds with essentially no slack.
    auto p = make_problem({atom(1.0, "x/2")},
                          Forcing::from_table({{0.0, 1.0}, {1.0, 1.0}}));
    auto G = build_antiderivative(p, 128);
    auto lip = estimate_lipschitz(G);
    CHECK(lip.value == doctest::Approx(1.0).epsilon(1e-9));
    auto xs = uniform_grid(-0.5, 1.5, 401);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); j += 7) {
            double lhs = std::abs(G(xs[i]) - G(xs[j]));
            CHECK(lhs <= (lip.value + 1e-9) * std::abs(xs[i] - xs[j]) + 1e-12);
        }
}

TEST_CASE("survival integral: closed-form limit law, zero and non-zero cases") {
    // g(t) = t - 1/3 on (0,1) against D(t) = t integrates to exactly zero.
    auto p = make_problem({atom(1.0, "x/2")}, Forcing::from_expression_text("t - 1/3"),
                          Interval(0.0, 1.0));
    auto G = build_antiderivative(p, 256);
    ClosedFormCdf D([](double t) { return t; }, 0.0, 1.0);
    auto rep = evaluate_survival_integral(G, p.g, D, kSurvivalTolClosedForm);
    CHECK(std::abs(rep.value) <= 1e-8 * rep.scale);
    CHECK(rep.scale == doctest::Approx(5.0 / 18.0).epsilon(1e-8));
    CHECK(rep.pass);

    // The box forcing against the same law leaves mass 1/2 behind.
    auto q = make_problem({atom(1.0, "x/2")},
                          Forcing::from_table({{0.0, 1.0}, {1.0, 1.0}}));
    auto Gq = build_antiderivative(q, 128);
    auto rep2 = evaluate_survival_integral(Gq, q.g, D, kSurvivalTolClosedForm);
    CHECK(rep2.value == doctest::Approx(0.5).epsilon(1e-8));
    CHECK_FALSE(rep2.pass);
}

TEST_CASE("survival integral: atomic laws reduce to mass-weighted antiderivative sums") {
    auto p = make_problem({atom(1.0, "x/2")}, Forcing::from_expression_text("t - 1/3"),
                          Interval(0.0, 1.0));
    auto G = build_antiderivative(p, 256);

    AtomicCdf point_mass(AtomicDistribution{{{1.0, 1.0}}});
    auto rep = evaluate_survival_integral(G, p.g, point_mass, kSurvivalTolEstimated);
    CHECK(rep.value == doctest::Approx(1.0 / 6.0).epsilon(1e-8));

    EmpiricalCdf half(std::vector<double>{0.5});
    auto rep2 = evaluate_survival_integral(G, p.g, half, kSurvivalTolEstimated);
    CHECK(rep2.value == doctest::Approx(-1.0 / 24.0).epsilon(1e-4));
}

TEST_CASE("survival integral shrinks along the iterate laws of a manufactured pair") {
    // For the halving pair with the hand-built box forcing, the integral of
    // g against the survival function of the depth-n law from 0 is exactly
    // -2^-(n+2): a frozen ladder the estimates must walk down.
    auto p = make_problem({atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")}, box_pair_forcing());
    auto G = build_antiderivative(p, 512);
    CHECK(G.total_mass() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(G(0.0) == doctest::Approx(-0.25).epsilon(1e-10));
    CHECK(G(1.0) == doctest::Approx(0.25).epsilon(1e-10));

    auto cep = extend_to_closure(p);
    double prev = 1.0;
    for (int depth : {2, 4, 6, 8}) {
        AtomicCdf law(exact_distribution(cep, 0.0, depth, 1u << 20));
        auto rep = evaluate_survival_integral(G, p.g, law, kSurvivalTolEstimated);
        double expected = -std::ldexp(0.25, -depth);
        CHECK(rep.value == doctest::Approx(expected).epsilon(1e-7));
        CHECK(std::abs(rep.value) < prev);
        prev = std::abs(rep.value);
        CHECK(rep.pass == (depth >= 8)); // |value| crosses 1e-3*scale at depth 8
    }
}
