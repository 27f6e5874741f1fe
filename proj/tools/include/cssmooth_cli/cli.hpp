#pragma once

#include <iosfwd>

namespace cssmooth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs the cssmooth command line. Returns 0 on success, 2 on configuration
/// errors (bad flags, invalid values, unreadable or malformed inputs) and 3
/// on runtime failures (divergence, write errors).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace cssmooth::cli
