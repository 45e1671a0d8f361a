#include "refineq/interp.hpp"

#include <algorithm>
#include <cmath>

#include "refineq/errors.hpp"

namespace refineq {

Pchip::Pchip(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n != y_.size() || n < 2) throw NumericError("pchip needs matching grids, n >= 2");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(x_[i] < x_[i + 1])) throw NumericError("pchip grid must be strictly increasing");

    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
    } else {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] == 0.0 || delta[i] == 0.0 ||
                (delta[i - 1] > 0) != (delta[i] > 0)) {
                d_[i] = 0.0;
            } else {
                double w1 = 2.0 * h[i] + h[i - 1];
                double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        auto edge = [](double h0, double h1, double d0, double d1) {
            double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if (d0 == 0.0 || (d > 0) != (d0 > 0))
                d = 0.0;
            else if ((d1 == 0.0 || (d0 > 0) != (d1 > 0)) && std::fabs(d) > 3.0 * std::fabs(d0))
                d = 3.0 * d0;
            return d;
        };
        d_[0] = edge(h[0], h[1], delta[0], delta[1]);
        d_[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
}

std::size_t Pchip::cell(double q) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), q);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    if (i == 0) return 0;
    if (i >= x_.size()) return x_.size() - 2;
    return i - 1;
}

double Pchip::operator()(double q) const {
    if (q <= x_.front()) return y_.front();
    if (q >= x_.back()) return y_.back();
    std::size_t i = cell(q);
    double h = x_[i + 1] - x_[i];
    double t = (q - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1;
    double h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2;
    double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double Pchip::derivative(double q) const {
    if (q <= x_.front() || q >= x_.back()) return 0.0;
    std::size_t i = cell(q);
    double h = x_[i + 1] - x_[i];
    double t = (q - x_[i]) / h;
    double t2 = t * t;
    double h00 = (6 * t2 - 6 * t) / h;
    double h10 = 3 * t2 - 4 * t + 1;
    double h01 = (-6 * t2 + 6 * t) / h;
    double h11 = 3 * t2 - 2 * t;
    return h00 * y_[i] + h10 * d_[i] + h01 * y_[i + 1] + h11 * d_[i + 1];
}

double linear_interp(const std::vector<double>& x, const std::vector<double>& y, double q) {
    if (x.empty()) return 0.0;
    if (q < x.front() || q > x.back()) return 0.0;
    auto it = std::upper_bound(x.begin(), x.end(), q);
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    if (i == 0) return y.front();
    if (i >= x.size()) return y.back();
    double t = (q - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
}

std::vector<double> finite_difference_derivative(const std::vector<double>& x,
                                                 const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3)
        throw NumericError("finite differences need at least three nodes");
    std::vector<double> d(n);
    auto quad_deriv = [&](std::size_t i0, std::size_t i1, std::size_t i2, double at) {
        double x0 = x[i0], x1 = x[i1], x2 = x[i2];
        return y[i0] * (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2)) +
               y[i1] * (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
               y[i2] * (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
    };
    d[0] = quad_deriv(0, 1, 2, x[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = quad_deriv(i - 1, i, i + 1, x[i]);
    d[n - 1] = quad_deriv(n - 3, n - 2, n - 1, x[n - 1]);
    return d;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& y) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
        s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return s;
}

double l1_distance(const std::vector<double>& x, const std::vector<double>& f,
                   const std::vector<double>& g) {
    if (x.size() != f.size() || x.size() != g.size())
        throw NumericError("l1_distance needs equal-length inputs");
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        double a = std::fabs(f[i - 1] - g[i - 1]);
        double b = std::fabs(f[i] - g[i]);
        s += 0.5 * (a + b) * (x[i] - x[i - 1]);
    }
    return s;
}

} // namespace refineq
