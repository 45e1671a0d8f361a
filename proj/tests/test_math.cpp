#include "doctest.h"
#include "refineq/grids.hpp"
#include "refineq/interp.hpp"
#include "refineq/quadrature.hpp"
#include "refineq/rng.hpp"

#include <cmath>

using namespace refineq;

TEST_CASE("uniform grid hits both endpoints with even spacing") {
    auto g = uniform_grid(-1.0, 3.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == -1.0);
    CHECK(g.back() == 3.0);
    CHECK(g[2] == doctest::Approx(1.0));
}

TEST_CASE("chebyshev grid stays strictly inside and is sorted") {
    auto g = chebyshev_grid(0.0, 1.0, 32);
    REQUIRE(g.size() == 32);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i] > 0.0);
        CHECK(g[i] < 1.0);
        if (i) CHECK(g[i] > g[i - 1]);
    }
}

TEST_CASE("probe grids respect interval type") {
    Interval whole;
    auto g1 = probe_grid(whole, 21);
    CHECK(g1.front() < -3.0);
    CHECK(g1.back() > 3.0);

    Interval ray(0.0, std::numeric_limits<double>::infinity());
    auto g2 = probe_grid(ray, 21);
    for (double x : g2) CHECK(x > 0.0);
    CHECK(g2.back() > 10.0);

    Interval unit(0.0, 1.0);
    auto g3 = probe_grid(unit, 9);
    for (double x : g3) {
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("approach sequences converge to the requested endpoint") {
    Interval unit(0.0, 1.0);
    auto up = approach_sequence(unit, true, 8);
    for (std::size_t i = 1; i < up.size(); ++i) CHECK(up[i] > up[i - 1]);
    CHECK(up.back() > 0.99);
    CHECK(up.back() < 1.0);

    Interval whole;
    auto down = approach_sequence(whole, false, 8, 1.0);
    CHECK(down.back() == -128.0);
}

TEST_CASE("random streams are reproducible and substreams differ") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 16; ++i) {
        auto va = a.next_u64();
        CHECK(va == b.next_u64());
    }
    CHECK(a.next_u64() != c.next_u64());
    CHECK(substream_seed(42, 0) != substream_seed(42, 1));
    CHECK(substream_seed(42, 0) == substream_seed(42, 0));
}

TEST_CASE("uniform doubles live in [0,1) with the right mean") {
    Rng r(2026);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = r.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("bounded draws are in range and cover all residues") {
    Rng r(7);
    bool seen[5] = {};
    for (int i = 0; i < 200; ++i) {
        auto k = r.next_below(5);
        REQUIRE(k < 5);
        seen[k] = true;
    }
    for (bool s : seen) CHECK(s);
}

TEST_CASE("quadrature integrates smooth functions to tight tolerance") {
    auto r1 = integrate_adaptive([](double x) { return x * x; }, 0.0, 1.0);
    CHECK(r1.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r1.converged);

    auto r2 = integrate_adaptive([](double x) { return std::sin(x); }, 0.0, M_PI);
    CHECK(r2.value == doctest::Approx(2.0).epsilon(1e-12));

    auto r3 = integrate_adaptive([](double x) { return std::exp(-x * x); }, -6.0, 6.0);
    CHECK(r3.value == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("quadrature localizes jump discontinuities") {
    auto step = [](double x) { return x < 1.0 / 3.0 ? 1.0 : 0.0; };
    QuadOptions opt;
    opt.abs_tol = 1e-9;
    opt.max_cells = 20000;
    auto r = integrate_adaptive(step, 0.0, 1.0, opt);
    CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

    auto rb = integrate_with_breakpoints(step, 0.0, 1.0, {1.0 / 3.0});
    CHECK(rb.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("quadrature observer sees every sample") {
    double sup = 0.0, arg = 0.0;
    QuadOptions opt;
    opt.observer = [&](double x, double fx) {
        if (std::fabs(fx) > sup) {
            sup = std::fabs(fx);
            arg = x;
        }
    };
    auto bump = [](double x) { return std::exp(-20.0 * (x - 0.7) * (x - 0.7)); };
    integrate_adaptive(bump, 0.0, 1.0, opt);
    CHECK(sup == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(arg == doctest::Approx(0.7).epsilon(1e-2));
}

TEST_CASE("reversed limits flip the sign") {
    auto r = integrate_adaptive([](double x) { return x; }, 1.0, 0.0);
    CHECK(r.value == doctest::Approx(-0.5));
}

TEST_CASE("pchip reproduces linear data and preserves monotonicity") {
    std::vector<double> x = {0.0, 0.3, 1.0, 1.5, 2.0};
    std::vector<double> lin;
    for (double v : x) lin.push_back(2.0 * v - 1.0);
    Pchip p(x, lin);
    CHECK(p(0.77) == doctest::Approx(0.54));
    CHECK(p(-1.0) == doctest::Approx(-1.0)); // constant extension
    CHECK(p(5.0) == doctest::Approx(3.0));

    // Monotone but abruptly flattening data: interpolant must not overshoot.
    std::vector<double> y = {0.0, 0.0, 0.9, 1.0, 1.0};
    Pchip q(x, y);
    double prev = q(0.0);
    for (int i = 1; i <= 400; ++i) {
        double cur = q(2.0 * i / 400.0);
        CHECK(cur >= prev - 1e-14);
        prev = cur;
    }
    CHECK(q(0.1) == doctest::Approx(0.0));
    CHECK(q(1.9) == doctest::Approx(1.0));
}

TEST_CASE("pchip derivative matches on smooth data") {
    std::vector<double> x, y;
    for (int i = 0; i <= 100; ++i) {
        double t = i / 100.0;
        x.push_back(t);
        y.push_back(t * t * t);
    }
    Pchip p(x, y);
    CHECK(p.derivative(0.5) == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(p(0.505) == doctest::Approx(0.505 * 0.505 * 0.505).epsilon(1e-8));
}

TEST_CASE("linear interpolation is zero outside its grid") {
    std::vector<double> x = {0.0, 1.0, 2.0};
    std::vector<double> y = {0.0, 2.0, 0.0};
    CHECK(linear_interp(x, y, 0.5) == doctest::Approx(1.0));
    CHECK(linear_interp(x, y, 1.5) == doctest::Approx(1.0));
    CHECK(linear_interp(x, y, -0.1) == 0.0);
    CHECK(linear_interp(x, y, 2.1) == 0.0);
    CHECK(linear_interp(x, y, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("three-point derivatives are exact for quadratics") {
    std::vector<double> x = {0.0, 0.4, 1.0, 1.3, 2.0};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v * v - 2.0 * v + 1.0);
    auto d = finite_difference_derivative(x, y);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(d[i] == doctest::Approx(6.0 * x[i] - 2.0).epsilon(1e-12));
}

TEST_CASE("cumulative trapezoid and l1 distance behave") {
    std::vector<double> x = {0.0, 0.5, 1.0};
    std::vector<double> y = {0.0, 0.5, 1.0};
    auto c = cumulative_trapezoid(x, y);
    CHECK(c[0] == 0.0);
    CHECK(c[2] == doctest::Approx(0.5));
    CHECK(trapezoid(x, y) == doctest::Approx(0.5));

    std::vector<double> z = {1.0, 1.5, 2.0};
    CHECK(l1_distance(x, y, z) == doctest::Approx(1.0));
}
