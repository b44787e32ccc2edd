#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace synorm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kRuntimeError = 2,
};

// Entry point for the `synorm` tool. `args[0]` is the program name.
// Subcommands: train, eval, predict, candidates, gensynth, fit-sparse.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace synorm::cli
