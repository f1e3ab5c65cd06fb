#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace zibbmr::cli {

// Raised for anything the caller got wrong: flags, files, malformed data.
// Maps to exit code 1; numerical failures map to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

// Full command-line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv);

// Convenience wrapper for in-process tests; `args` excludes the program
// name, e.g. {"fit", "--data", "d.csv"}.
int run(const std::vector<std::string>& args);

}  // namespace zibbmr::cli
