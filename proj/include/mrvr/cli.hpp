#pragma once

#include <string>
#include <vector>

namespace mrvr {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Entry point behind the command-line tool: args excludes the program name.
// Subcommands: train, predict, simulate, benchmark.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace mrvr
