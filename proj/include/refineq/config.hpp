#pragma once

#include <string>

#include "refineq/problem.hpp"

namespace refineq {

// Reads and fully validates a problem from a JSON document (see README for
// the schema). Throws ConfigError on any schema, weight, expression, or
// integrability violation.
Problem load_problem_from_text(const std::string& json_text);
Problem load_problem(const std::string& path);

// Serializes a problem back into the same schema; inverse of loading up to
// expression formatting. Used by the transform subcommand to emit
// conjugated problems.
std::string problem_to_json(const Problem& problem);

} // namespace refineq
