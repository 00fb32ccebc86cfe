#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "sqdr/error.h"

namespace sqdr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int ExitCodeFor(ErrorKind kind);

// args excludes the program name. Data goes to `out`, diagnostics to `err`.
// SQDR_THREADS caps worker threads (default 1).
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqdr
