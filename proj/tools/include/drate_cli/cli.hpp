#pragma once

#include <iosfwd>

namespace drate::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kFailure = 3,
};

/// Entry point of the `drate` tool; diagnostics go to `err`, progress
/// summaries to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drate::cli
