#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace omniguide::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kConfig = 3,
    kHandshake = 4,
    kRuntime = 5,
};

/// Entry point shared by the binary and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Asks a running `serve` command to drain and return. Async-signal-safe.
void request_shutdown() noexcept;

}  // namespace omniguide::cli
