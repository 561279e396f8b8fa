#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace htr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;        // I/O failures, malformed files, bad flags
inline constexpr int kExitMismatch = 3;  // shape, frame and other semantic mismatches

/// Runs one subcommand. `args` excludes the program name. Machine-readable
/// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace htr::cli
