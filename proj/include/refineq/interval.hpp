#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "refineq/errors.hpp"

namespace refineq {

// An open interval (lo, hi) on the extended real line. Either endpoint may
// be infinite; lo < hi is enforced on construction.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
            throw ConfigError("interval endpoints must satisfy lo < hi");
    }

    bool bounded_below() const { return std::isfinite(lo); }
    bool bounded_above() const { return std::isfinite(hi); }
    bool bounded() const { return bounded_below() && bounded_above(); }
    double length() const { return hi - lo; }

    // Open-interval membership.
    bool contains(double x) const { return x > lo && x < hi; }
    // Membership in the closure, with infinite endpoints never attained.
    bool contains_closure(double x) const {
        return (x > lo || x == lo) && (x < hi || x == hi);
    }

    double clamp_to_closure(double x) const {
        if (x < lo) return lo;
        if (x > hi) return hi;
        return x;
    }

    std::string to_string() const;
};

inline std::string Interval::to_string() const {
    auto fmt = [](double v, bool low) -> std::string {
        if (!std::isfinite(v)) return low ? "-inf" : "+inf";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    };
    return "(" + fmt(lo, true) + ", " + fmt(hi, false) + ")";
}

} // namespace refineq
