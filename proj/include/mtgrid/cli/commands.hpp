#pragma once

#include <iosfwd>

namespace mtgrid::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
// single line "error: <kind>: <message>" on the error stream.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mtgrid::cli
