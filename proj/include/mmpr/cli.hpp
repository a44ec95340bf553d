#pragma once

#include <iosfwd>

namespace mmpr {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalidConfig = 1, kExitNumericalFailure = 2 };

/// Entry point of the `mmpr` tool. Subcommands: ode-convergence,
/// sde-moments, sde-parareal, selftest.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace mmpr
