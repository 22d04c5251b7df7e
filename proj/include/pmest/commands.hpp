#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmest/harness.hpp"

namespace pmest {

/// Exit codes of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitToleranceFailure = 1;
inline constexpr int kExitConfigError = 2;

/// Runs one subcommand (args exclude the program name):
///   gen | estimate | lambda-curve | alpha-curve | tune | augment | validate
/// each taking [--config FILE] [--threads N] [key=value ...].
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Curve as CSV: '#' echo lines, then hyperparam,estimate,oracle,proxy,flags.
void write_curve_csv(std::ostream& out, const ErrorCurve& curve, const std::vector<std::string>& echo);

}  // namespace pmest
