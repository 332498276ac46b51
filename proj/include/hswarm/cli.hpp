#pragma once

#include <iosfwd>

namespace hswarm {

/// Entry point of the `hswarm` command line tool. Subcommands: optimize,
/// decode, evaluate, analyze, sweep, serve-stub. Results go to `out`;
/// progress and errors (as one JSON object) go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hswarm
