#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace condvine::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 2, kNumericError = 3 };

/// Runs one command line (arguments after the program name). Data goes to
/// files or `out`, diagnostics and logs to `err`. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace condvine::cli
