#pragma once

#include <string>
#include <vector>

namespace refineq {

inline constexpr const char* kToolVersion = "0.3.0";

// Command-line entry point; `args` excludes the program name. Returns the
// process exit code:
//   0  success
//   1  hypothesis-check failure (only when --strict gates the run)
//   2  convergence or numeric failure
//   3  configuration, usage, or parse error
// Every run with an --out path also writes <out>.manifest.json recording
// the command, resolved configuration, seed, tool version, timestamps, and
// per-stage status, so any output can be reproduced from the manifest.
int run_cli(const std::vector<std::string>& args);

} // namespace refineq
