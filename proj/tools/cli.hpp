#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uda::cli {

/// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kRuntime = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uda::cli
