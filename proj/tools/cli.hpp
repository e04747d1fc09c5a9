#pragma once

#include <iosfwd>

namespace otmap::cli {

/// Exit codes: 0 success, 1 usage or input error, 2 a configured threshold failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitThreshold = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace otmap::cli
