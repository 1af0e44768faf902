#pragma once

#include <iosfwd>

namespace kaleido {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitNoSolution = 1;
inline constexpr int kExitInvalidInput = 2;

/// Entry point of the `kaleido` command-line tool. Results go to --out or `out`,
/// diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kaleido
