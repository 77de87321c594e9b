#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mislab {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitProvenFailure = 2,
  kExitRuntime = 3,
};

/// The `mislab` command line. `args` excludes the program name.
///
///   mislab analytic|estimate|oracle-check|verify|bias-demo|sweep
///          --config <path> [--seed S] [--out <path>] [--format json|csv] [--timings]
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mislab
