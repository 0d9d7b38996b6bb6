#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdosr::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,      // bad flags, unreadable or unwritable files, model/data mismatch
  kNumerical = 3,  // training produced a non-finite loss
  kPartial = 4,    // at least one sweep run failed
};

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdosr::cli
