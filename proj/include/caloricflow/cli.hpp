/// @file cli.hpp
/// @brief Command-line front end: `caloricflow <command> --config <path> [--dotted.key=value ...]`.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace caloricflow::cli {

/// Exit codes of run_cli.
enum ExitCode : int { kAllPass = 0, kCheckFailed = 1, kConfigError = 2, kComputeFault = 3 };

/// args excludes the program name. Writes the artifacts of the run and a one-line summary per check to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace caloricflow::cli
