#include "refineq/grids.hpp"

#include <algorithm>
#include <cmath>

namespace refineq {

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    if (n < 2) throw NumericError("uniform_grid needs at least two points");
    std::vector<double> g(n);
    double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + h * static_cast<double>(i);
    g.back() = hi;
    return g;
}

std::vector<double> chebyshev_grid(double lo, double hi, std::size_t n) {
    if (n < 1) throw NumericError("chebyshev_grid needs at least one point");
    std::vector<double> g(n);
    double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    for (std::size_t i = 0; i < n; ++i) {
        // Nodes of the first kind, reordered to be increasing.
        double theta = M_PI * (2.0 * static_cast<double>(n - 1 - i) + 1.0) /
                       (2.0 * static_cast<double>(n));
        g[i] = c + r * std::cos(theta);
    }
    return g;
}

std::vector<double> probe_grid(const Interval& iv, std::size_t n) {
    if (iv.bounded()) return chebyshev_grid(iv.lo, iv.hi, n);

    // Map u in (-1, 1) to x via atanh compression; anchor the map on the
    // finite endpoint when there is one.
    const double scale = 3.0;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        double t = scale * std::atanh(u);
        if (iv.bounded_below())
            g[i] = iv.lo + std::exp(t); // (lo, +inf): exp covers all magnitudes
        else if (iv.bounded_above())
            g[i] = iv.hi - std::exp(-t);
        else
            g[i] = t;
    }
    std::sort(g.begin(), g.end());
    return g;
}

std::vector<double> approach_sequence(const Interval& iv, bool toward_hi,
                                      std::size_t count, double base) {
    std::vector<double> seq;
    seq.reserve(count);
    double endpoint = toward_hi ? iv.hi : iv.lo;
    if (std::isfinite(endpoint)) {
        // Keep the whole sequence inside the interval even when it is short.
        double room = iv.bounded() ? 0.25 * iv.length() : base;
        double step = std::min(base, room);
        for (std::size_t k = 0; k < count; ++k) {
            double x = toward_hi ? endpoint - step * std::pow(0.5, static_cast<double>(k))
                                 : endpoint + step * std::pow(0.5, static_cast<double>(k));
            seq.push_back(x);
        }
    } else {
        for (std::size_t k = 0; k < count; ++k) {
            double mag = base * std::pow(2.0, static_cast<double>(k));
            seq.push_back(toward_hi ? mag : -mag);
        }
    }
    return seq;
}

} // namespace refineq
