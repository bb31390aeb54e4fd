#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "c3mod/providers/http.hpp"

namespace c3mod::interface {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (args excludes the program name). Results go to
/// `out`, diagnostics and the synopsis to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                 const providers::EnvLookup& env = providers::process_env());

}  // namespace c3mod::interface
