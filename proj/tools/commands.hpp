#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skiptag::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kModel = 4, kInternal = 5 };

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skiptag::cli
