#include "refineq/cdf.hpp"

#include <algorithm>
#include <cmath>

#include "refineq/errors.hpp"

namespace refineq {

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw NumericError("empirical cdf needs at least one sample");
    std::sort(samples_.begin(), samples_.end());
}

double EmpiricalCdf::value(double t) const {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double EmpiricalCdf::value_left(double t) const {
    auto it = std::lower_bound(samples_.begin(), samples_.end(), t);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

std::vector<double> EmpiricalCdf::jump_points() const {
    std::vector<double> pts(samples_);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

std::pair<double, double> EmpiricalCdf::range_hint() const {
    return {samples_.front(), samples_.back()};
}

AtomicCdf::AtomicCdf(AtomicDistribution dist) : dist_(std::move(dist)) {
    if (dist_.points.empty()) throw NumericError("atomic cdf needs at least one point");
    cum_.reserve(dist_.points.size());
    double s = 0.0;
    for (const auto& p : dist_.points) {
        s += p.second;
        cum_.push_back(s);
    }
}

double AtomicCdf::value(double t) const {
    // index of the last location <= t
    auto cmp = [](const std::pair<double, double>& p, double v) { return p.first <= v; };
    auto it = std::partition_point(dist_.points.begin(), dist_.points.end(),
                                   [&](const auto& p) { return cmp(p, t); });
    std::size_t n = static_cast<std::size_t>(it - dist_.points.begin());
    return n == 0 ? 0.0 : cum_[n - 1];
}

double AtomicCdf::value_left(double t) const {
    auto it = std::partition_point(dist_.points.begin(), dist_.points.end(),
                                   [&](const auto& p) { return p.first < t; });
    std::size_t n = static_cast<std::size_t>(it - dist_.points.begin());
    return n == 0 ? 0.0 : cum_[n - 1];
}

std::vector<double> AtomicCdf::jump_points() const {
    std::vector<double> pts;
    pts.reserve(dist_.points.size());
    for (const auto& p : dist_.points) pts.push_back(p.first);
    return pts;
}

std::pair<double, double> AtomicCdf::range_hint() const {
    return {dist_.points.front().first, dist_.points.back().first};
}

ClosedFormCdf::ClosedFormCdf(std::function<double(double)> f, double lo, double hi)
    : f_(std::move(f)), lo_(lo), hi_(hi) {}

double ClosedFormCdf::value(double t) const {
    double v = f_(t);
    if (v < 0.0) return 0.0;
    if (v > 1.0) return 1.0;
    return v;
}

double ClosedFormCdf::value_left(double t) const { return value(t); }

double ks_distance(const CdfView& a, const CdfView& b) {
    std::vector<double> pts = a.jump_points();
    {
        auto jb = b.jump_points();
        pts.insert(pts.end(), jb.begin(), jb.end());
    }
    // Dense probes so two continuous arguments still get compared; for step
    // functions the exact supremum already lives on the jump set.
    auto ra = a.range_hint();
    auto rb = b.range_hint();
    double lo = std::min(ra.first, rb.first);
    double hi = std::max(ra.second, rb.second);
    if (std::isfinite(lo) && std::isfinite(hi) && lo < hi) {
        const int n = 1024;
        for (int i = 0; i <= n; ++i)
            pts.push_back(lo + (hi - lo) * static_cast<double>(i) / n);
    } else if (std::isfinite(lo)) {
        pts.push_back(lo);
    } else if (std::isfinite(hi)) {
        pts.push_back(hi);
    }

    double d = 0.0;
    for (double t : pts) {
        if (!std::isfinite(t)) continue;
        d = std::max(d, std::fabs(a.value(t) - b.value(t)));
        d = std::max(d, std::fabs(a.value_left(t) - b.value_left(t)));
    }
    return d;
}

} // namespace refineq
