#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace booster::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3 };

/// Entry point of the `booster` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace booster::cli
