#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tpvd {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitFormat = 2,  // unreadable or malformed files, failed writes
  kExitDomain = 3,  // inputs rejected by a module precondition
};

/// Runs the `tpvd` command line. `args` excludes the program name.
/// Diagnostics go to `err`, progress and summaries to `out`.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tpvd
