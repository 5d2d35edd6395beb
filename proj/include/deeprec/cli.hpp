#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deeprec {

/// Entry point behind the `deeprec` tool. `args` excludes the program name;
/// `self` is the path used to re-launch the tool for ablation runs. Data goes
/// to `out`, diagnostics to `err`. Returns the process exit status.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   const std::string& self = "/proc/self/exe");

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitDiverged = 3,
};

}  // namespace deeprec
