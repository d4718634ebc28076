#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icra::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // unexpected internal error
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitAcceptance = 5;

/// Runs `icra <args...>` (args excludes the program name) and returns the
/// exit code. All errors are reported on `err`; nothing throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icra::cli
