#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bsf::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidArguments = 2,
  kTransportFailure = 3,
  kAdequacyFailure = 4,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bsf::cli
