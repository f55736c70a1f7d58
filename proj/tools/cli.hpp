#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ftscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one command line (without the program name). Diagnostics go to `err`,
/// progress to `out`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ftscope::cli
