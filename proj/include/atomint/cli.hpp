#pragma once

#include <iosfwd>

namespace atomint {

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int config_error = 2;
inline constexpr int runtime_error = 3;
inline constexpr int convergence_failure = 4;
}  // namespace exit_code

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace atomint
