#pragma once

#include <cstddef>
#include <vector>

namespace refineq {

// Shape-preserving cubic Hermite interpolant (Fritsch-Carlson slopes).
// Monotone data produces a monotone interpolant, which is what a
// distribution function needs. Constant extension outside the grid.
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y);

    double operator()(double q) const;
    double derivative(double q) const;

    const std::vector<double>& grid() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    bool empty() const { return x_.empty(); }

private:
    std::size_t cell(double q) const;
    std::vector<double> x_, y_, d_;
};

// Piecewise-linear interpolation on sorted nodes; zero outside the grid
// (densities vanish off their support).
double linear_interp(const std::vector<double>& x, const std::vector<double>& y, double q);

// Derivative estimates on a nonuniform grid from local quadratics
// (three-point stencils, one-sided at the ends).
std::vector<double> finite_difference_derivative(const std::vector<double>& x,
                                                 const std::vector<double>& y);

// Running trapezoid integral; out[0] = 0.
std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& y);

// Trapezoid approximation of the integral of |f - g| sampled on a shared
// grid.
double l1_distance(const std::vector<double>& x, const std::vector<double>& f,
                   const std::vector<double>& g);

double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

} // namespace refineq
