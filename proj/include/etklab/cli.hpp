#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace etklab {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitIo = 2, kExitSchema = 3, kExitCap = 4 };

/// Runs `etklab <subcommand> --config <path> [--out <dir>] [--threads <k>] [--seed <u64>]`.
/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace etklab
