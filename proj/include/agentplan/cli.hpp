#pragma once

#include <iosfwd>

namespace agentplan {

/// Entry point of the agentplan command line tool. Returns the process exit
/// status: 0 success, 1 domain fault, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace agentplan
