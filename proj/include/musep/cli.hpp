#pragma once

#include "musep/error.hpp"

#include <iosfwd>

namespace musep {

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,    // bad flags or configuration
  kExitData = 3,     // unreadable, malformed or inconsistent inputs
  kExitNumeric = 4,  // non-finite loss or degenerate statistics
};

int exit_code_for(ErrorCode code);

/// Entry point of the `musep` tool. Reports go to files, human-readable
/// summaries to `out`, per-epoch logs and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace musep
