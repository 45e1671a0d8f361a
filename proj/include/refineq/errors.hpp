#pragma once

#include <stdexcept>
#include <string>

namespace refineq {

// Malformed configuration document, bad schema, weight-sum violation,
// non-integrable forcing term, and similar input rejections.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation was called with inputs that violate its stated preconditions
// (e.g. a solver invoked on a family that is not a mean contraction).
class PreconditionError : public std::runtime_error {
public:
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exact tree expansion would exceed the caller-supplied support budget.
class SupportBudgetError : public std::runtime_error {
public:
    explicit SupportBudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN propagation, divergent tails, and other numeric breakdowns that are
// not representable as a status flag.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace refineq
