#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wetpred::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

/// Runs the tool on `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace wetpred::cli
