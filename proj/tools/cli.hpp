#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lga::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

// Runs the lga command line with `args` (program name excluded), writing
// primary output to `out` and diagnostics to `err`. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lga::cli
