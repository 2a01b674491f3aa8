#pragma once

#include <iosfwd>

namespace qdacode {

/// Entry point of the `qdacode` tool. Returns the process exit code:
/// 0 ok, 2 bad input, 3 metric precondition, 4 store conflict, 5 transport.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdacode
