#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hqn::cli {

enum ExitCode : int {
    kSuccess = 0,
    kRuntimeError = 1,
    kUsageError = 2,
};

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color = false);

} // namespace hqn::cli
