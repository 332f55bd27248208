#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nirvar::cli {

enum ExitCode : int { kOk = 0, kInternalError = 1, kConfigError = 2, kNumericalError = 3 };

/// Entry point shared by main() and the tests. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nirvar::cli
