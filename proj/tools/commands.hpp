#pragma once

#include <CLI11.hpp>

#include <functional>

namespace nssr::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kIo = 3,
  kFormat = 4,
  kDiverged = 5,
};

/// Registers every subcommand on `app`. The returned callback runs whichever
/// subcommand was selected after parsing.
std::function<int()> register_commands(CLI::App& app);

}  // namespace nssr::cli
