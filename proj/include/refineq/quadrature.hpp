#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace refineq {

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t cells = 0;
    bool converged = true;
};

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    std::size_t max_cells = 4096;
    // Called at every abscissa the rule touches; used to track sup |f| and
    // its location as a byproduct of integration.
    std::function<void(double x, double fx)> observer;
};

// Adaptive Gauss-Kronrod 7/15 over a finite interval, refining the cell
// with the largest error estimate until the global estimate meets the
// tolerance. Never throws on slow convergence; check `converged`.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& opt = {});

// Same, but splits [a, b] at the given knots first. Use when the integrand
// has known breakpoints (piecewise tables, indicator edges).
QuadResult integrate_with_breakpoints(const std::function<double(double)>& f, double a, double b,
                                      const std::vector<double>& knots,
                                      const QuadOptions& opt = {});

} // namespace refineq
