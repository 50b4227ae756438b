#pragma once

#include <iosfwd>

namespace okl {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;      // parse or validation error
inline constexpr int kExitNumerical = 2;  // numerical failure, or a failed verify check
inline constexpr int kExitMaxEpochs = 3;  // training stopped at max epochs

/// Entry point of the `okl` tool: train | predict | eval | cv | export-theta | bench |
/// verify | synth. Normal output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace okl
