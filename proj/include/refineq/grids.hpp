#pragma once

#include <cstddef>
#include <vector>

#include "refineq/interval.hpp"

namespace refineq {

// n equally spaced points with both endpoints included. n >= 2.
std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

// n Chebyshev points of the first kind mapped to (lo, hi); all interior, so
// they are usable on open intervals.
std::vector<double> chebyshev_grid(double lo, double hi, std::size_t n);

// Probe grid for an interval that may be unbounded: Chebyshev nodes on a
// bounded interval, tanh-compressed nodes (x = center + scale*atanh(u))
// on an unbounded one. Always strictly inside the interval, sorted.
std::vector<double> probe_grid(const Interval& iv, std::size_t n);

// Sequence approaching `endpoint` from inside the interval geometrically:
// useful for one-sided limits. For finite endpoints: endpoint +/- base*2^-k.
// For infinite endpoints: +/- base*2^k. k = 0..count-1.
std::vector<double> approach_sequence(const Interval& iv, bool toward_hi,
                                      std::size_t count, double base = 1.0);

} // namespace refineq
