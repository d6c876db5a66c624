#pragma once

#include <iosfwd>

namespace prelu::cli {

/// Runs one subcommand. Returns 0 on success, 1 on contract or data errors
/// and 2 on usage errors. Tables go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prelu::cli
