#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "refineq/grids.hpp"
#include "refineq/hypotheses.hpp"
#include "refineq/problem.hpp"
#include "refineq/solver.hpp"

using namespace refineq;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

MapAtom atom(double w, const char* map) { return MapAtom(w, parse_expression(map)); }

double box(double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; }

PointwiseDensity box_density() { return PointwiseDensity{box, {0.0, 1.0}}; }

// Halving pair on the line with the forcing manufactured from the unit box.
Problem halving_problem() {
    Problem p;
    p.label = "halving";
    p.interval = Interval(-kInf, kInf);
    p.atoms = {atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")};
    auto pair = manufacture_forcing(p, box_density(), 512);
    p.g = pair.g_exact;
    return p;
}

// Decreasing pair with the same invariant box density.
Problem reflected_problem() {
    Problem p;
    p.label = "reflected";
    p.interval = Interval(-kInf, kInf);
    p.atoms = {atom(0.5, "-x/2 + 1/2"), atom(0.5, "-x/2 + 1")};
    auto pair = manufacture_forcing(p, box_density(), 512);
    p.g = pair.g_exact;
    return p;
}

double density_l1_error(const DensityEstimate& d, double (*truth)(double)) {
    std::vector<double> ref(d.grid.size());
    for (std::size_t j = 0; j < d.grid.size(); ++j) ref[j] = truth(d.grid[j]);
    return l1_distance(d.grid, d.values, ref);
}

} // namespace

TEST_CASE("manufactured forcing: knots, point values, zero mass") {
    Problem p;
    p.interval = Interval(-kInf, kInf);
    p.atoms = {atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")};
    auto pair = manufacture_forcing(p, box_density(), 512);

    REQUIRE(pair.g_exact.breakpoints().size() == 4);
    CHECK(pair.g_exact.breakpoints()[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(pair.g_exact.breakpoints()[1] == doctest::Approx(0.0));
    CHECK(pair.g_exact.breakpoints()[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pair.g_exact.breakpoints()[3] == doctest::Approx(2.0).epsilon(1e-15));

    CHECK(pair.g_exact(0.25) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pair.g_exact(-0.5) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(pair.g_exact(1.5) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(pair.g_exact(2.5) == 0.0);
    CHECK(std::abs(pair.g_integral) <= 1e-9);

    CHECK(pair.g_table(0.25) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(pair.g_table(-0.5) == doctest::Approx(-0.25).epsilon(1e-6));
    CHECK(pair.g_table(2.5) == 0.0);
    auto scan = scan_integrable(pair.g_table, p.interval);
    CHECK(std::abs(scan.signed_mass) <= 1e-6);
    CHECK(scan.abs_mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("manufactured forcing: support mismatch violates the zero-mass identity") {
    Problem p;
    p.interval = Interval(-kInf, kInf);
    p.atoms = {atom(0.5, "x/2"), atom(0.5, "x/2 + 1/2")};
    // claim support [0, 1/2] while the callable really covers [0, 1]
    PointwiseDensity lying{box, {0.0, 0.5}};
    CHECK_THROWS_AS(manufacture_forcing(p, lying, 256), NumericError);
    PointwiseDensity degenerate{box, {0.0}};
    CHECK_THROWS_AS(manufacture_forcing(p, degenerate, 256), PreconditionError);
}

TEST_CASE("window: bounded intervals are their own window") {
    Problem p;
    p.interval = Interval(0.0, 1.0);
    p.atoms = {atom(1.0, "x^2")};
    p.g = Forcing::from_expression_text("t - 1/3");
    auto w = choose_window(extend_to_closure(p), 1);
    CHECK(w.lo == 0.0);
    CHECK(w.hi == 1.0);
    CHECK(w.how == "interval");
}

TEST_CASE("window: on the line it hulls the limit quantiles and the forcing support") {
    Problem p = halving_problem();
    auto w = choose_window(extend_to_closure(p), 1);
    CHECK(w.lo <= -1.0);
    CHECK(w.hi >= 2.0);
    CHECK(w.lo >= -1.5);
    CHECK(w.hi <= 2.5);
    CHECK(w.how == "quantile+forcing-support");
}

TEST_CASE("series solve recovers the box density from its manufactured forcing") {
    Problem p = halving_problem();
    auto cep = extend_to_closure(p);
    auto G = build_antiderivative(p, 512);

    SolveParams params;
    params.grid_points = 4097;
    auto F = solve_cdf_series(cep, G, params);
    CHECK(F.status == SolveStatus::Converged);
    CHECK(F.terms_used < 100);
    CHECK(F.tail_estimate <= 1e-7);
    CHECK(F.grid.front() == F.window.lo);
    CHECK(F.grid.back() == F.window.hi);

    // fixed-point defect at the nodes
    CHECK(residual_cdf_fixed_point(F, cep, G, 0.0) <= 1e-6);

    auto d = derive_density(F);
    CHECK(d.status == DensityStatus::Ok);
    CHECK(d.construction == "derivative_of_cdf");
    CHECK(density_l1_error(d, box) <= 0.05);
    CHECK(d.l1_norm == doctest::Approx(1.0).epsilon(0.05));
    CHECK(residual_refinement(d, p, 4 * 4096) <= 1e-2);

    // same seed, same bytes
    auto F2 = solve_cdf_series(cep, G, params);
    CHECK(std::equal(F.values.begin(), F.values.end(), F2.values.begin(), F2.values.end()));
}

TEST_CASE("series solve refuses decreasing or expansive families") {
    Problem down = reflected_problem();
    auto G = build_antiderivative(down, 256);
    CHECK_THROWS_AS(solve_cdf_series(extend_to_closure(down), G, SolveParams{}),
                    PreconditionError);

    Problem wide;
    wide.interval = Interval(-kInf, kInf);
    wide.atoms = {atom(1.0, "2*x")};
    wide.g = Forcing::from_table({{0.0, 1.0}, {1.0, 1.0}});
    auto Gw = build_antiderivative(wide, 256);
    SolveParams params;
    params.window = Window{-4.0, 4.0, "fixed"};
    CHECK_THROWS_AS(solve_cdf_series(extend_to_closure(wide), Gw, params), PreconditionError);
}

TEST_CASE("reflected solve handles the all-decreasing pair") {
    Problem p = reflected_problem();
    auto cep = extend_to_closure(p);
    auto G = build_antiderivative(p, 512);

    SolveParams params;
    params.grid_points = 4097;
    auto F = solve_cdf_reflected(cep, G, 1.0, params);
    CHECK(F.status == SolveStatus::Converged);
    CHECK(F.alpha_mass == 1.0);
    CHECK(residual_cdf_fixed_point(F, cep, G, 1.0) <= 1e-5);

    auto d = derive_density(F);
    CHECK(d.status == DensityStatus::Ok);
    CHECK(density_l1_error(d, box) <= 0.05);
}

TEST_CASE("derivative self-check: resolved ramps pass, sub-grid jumps are flagged") {
    CdfSolution F;
    F.grid = uniform_grid(0.0, 1.0, 101);
    F.values.resize(F.grid.size());
    F.status = SolveStatus::Converged;

    for (std::size_t j = 0; j < F.grid.size(); ++j)
        F.values[j] = std::clamp((F.grid[j] - 0.45) / 0.1, 0.0, 1.0);
    F.interp = Pchip(F.grid, F.values);
    auto smooth = derive_density(F);
    CHECK(smooth.status == DensityStatus::Ok);
    CHECK(smooth.l1_norm == doctest::Approx(1.0).epsilon(0.02));

    for (std::size_t j = 0; j < F.grid.size(); ++j)
        F.values[j] = F.grid[j] < 0.503 ? 0.0 : 1.0;
    F.interp = Pchip(F.grid, F.values);
    auto jumpy = derive_density(F);
    CHECK(jumpy.status == DensityStatus::DerivativeUnreliable);
}

TEST_CASE("cascade iteration reproduces the box density directly") {
    Problem p = halving_problem();
    auto cep = extend_to_closure(p);

    SolveParams params;
    params.grid_points = 4097;
    auto d = cascade_iterate(cep, params);
    CHECK(d.status == DensityStatus::Ok);
    CHECK(d.construction == "cascade");
    CHECK(d.terms_used < 200);
    REQUIRE(d.residual_l1.has_value());
    CHECK(*d.residual_l1 <= 1e-2);
    CHECK(d.l1_norm == doctest::Approx(1.0).epsilon(0.05));
    CHECK(density_l1_error(d, box) <= 0.05);
}

TEST_CASE("cascade and differentiated series agree on the halving pair") {
    Problem p = halving_problem();
    auto cep = extend_to_closure(p);
    auto G = build_antiderivative(p, 512);

    SolveParams params;
    params.grid_points = 2049;
    params.window = Window{-1.1, 2.1, "fixed"};
    auto from_series = derive_density(solve_cdf_series(cep, G, params));
    auto from_cascade = cascade_iterate(cep, params);
    auto xs = uniform_grid(-1.1, 2.1, 4097);
    std::vector<double> a(xs.size()), b(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
        a[j] = from_series(xs[j]);
        b[j] = from_cascade(xs[j]);
    }
    CHECK(l1_distance(xs, a, b) <= 0.05);
}

TEST_CASE("explicit window override is honored") {
    Problem p = halving_problem();
    auto cep = extend_to_closure(p);
    auto G = build_antiderivative(p, 512);
    SolveParams params;
    params.grid_points = 257;
    params.window = Window{-2.0, 3.0, "fixed"};
    auto F = solve_cdf_series(cep, G, params);
    CHECK(F.window.how == "fixed");
    CHECK(F.grid.front() == -2.0);
    CHECK(F.grid.back() == 3.0);
}

TEST_CASE("refinement residual of the exact density is small") {
    Problem p = halving_problem();
    DensityEstimate d;
    d.grid = uniform_grid(-1.1, 2.1, 4097);
    d.values.resize(d.grid.size());
    for (std::size_t j = 0; j < d.grid.size(); ++j) d.values[j] = box(d.grid[j]);
    d.construction = "synthetic";
    CHECK(residual_refinement(d, p, 8192) <= 1e-2);
}
