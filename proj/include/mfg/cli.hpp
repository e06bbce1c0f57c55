#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mfg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;    // validation, assumption, config or flag errors
inline constexpr int kExitNumerical = 2;  // integration, eigensolver or convergence failures

/// Runs one subcommand. args excludes the program name. The one-line JSON
/// summary goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mfg::cli
