#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace refineq {

// Discrete law as sorted (location, mass) pairs; masses sum to 1 within
// 1e-12 after duplicate merging.
struct AtomicDistribution {
    std::vector<std::pair<double, double>> points;

    double total_mass() const {
        double s = 0.0;
        for (const auto& p : points) s += p.second;
        return s;
    }
};

// Common read-only view over the distribution-function flavors so the
// Kolmogorov-Smirnov distance can mix them freely.
class CdfView {
public:
    virtual ~CdfView() = default;
    // Right-continuous value P(X <= t).
    virtual double value(double t) const = 0;
    // Left limit P(X < t).
    virtual double value_left(double t) const = 0;
    // Jump locations; empty for continuous representations.
    virtual std::vector<double> jump_points() const = 0;
    // A finite interval carrying essentially all of the mass.
    virtual std::pair<double, double> range_hint() const = 0;
};

class EmpiricalCdf : public CdfView {
public:
    EmpiricalCdf() = default;
    explicit EmpiricalCdf(std::vector<double> samples);

    double value(double t) const override;
    double value_left(double t) const override;
    std::vector<double> jump_points() const override;
    std::pair<double, double> range_hint() const override;

    const std::vector<double>& sorted_samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }

private:
    std::vector<double> samples_; // sorted ascending
};

class AtomicCdf : public CdfView {
public:
    explicit AtomicCdf(AtomicDistribution dist);

    double value(double t) const override;
    double value_left(double t) const override;
    std::vector<double> jump_points() const override;
    std::pair<double, double> range_hint() const override;

    const AtomicDistribution& distribution() const { return dist_; }

private:
    AtomicDistribution dist_;
    std::vector<double> cum_; // cumulative masses aligned with dist_.points
};

// Continuous distribution function given in closed form; values are clamped
// to [0, 1].
class ClosedFormCdf : public CdfView {
public:
    ClosedFormCdf(std::function<double(double)> f, double lo, double hi);

    double value(double t) const override;
    double value_left(double t) const override;
    std::vector<double> jump_points() const override { return {}; }
    std::pair<double, double> range_hint() const override { return {lo_, hi_}; }

private:
    std::function<double(double)> f_;
    double lo_, hi_;
};

// Sup-norm distance, evaluated exactly at every jump point of either
// argument (both one-sided values), plus a dense probe grid to cover
// continuous-vs-continuous comparisons.
double ks_distance(const CdfView& a, const CdfView& b);

} // namespace refineq
