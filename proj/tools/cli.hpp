#pragma once

#include <string>
#include <vector>

namespace mlc::cli {

enum ExitCode { kOk = 0, kConfigError = 1, kInvariantError = 2, kIoError = 3 };

/// Entry point of the mlcsim command line; returns the process exit code.
int run(int argc, const char* const* argv);

/// "3..7" -> 3,4,5,6,7; "1,4,9" -> 1,4,9; "5" -> 5.
std::vector<unsigned long long> parse_seed_list(const std::string& s);
std::vector<double> parse_number_list(const std::string& s);

}  // namespace mlc::cli
