#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace polysafe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNegative = 2;

/// Runs one command. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polysafe::cli
