#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dann::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Process exit codes. Stable across releases.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kInputError = 3,
    kInvalidData = 4,
    kWriteFailure = 5,
    kReplayMismatch = 6,
};

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dann::cli
