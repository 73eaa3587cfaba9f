#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hcr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericFailure = 3,
};

inline constexpr int kSummaryFormatVersion = 1;

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hcr::cli
