#pragma once

// Command-line front end: segment, train, evaluate, compare, generate.

#include <ostream>
#include <span>
#include <string>

namespace mdd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;

/// `args` excludes the program name. Progress goes to `out`, usage and errors to `err`.
int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace mdd
