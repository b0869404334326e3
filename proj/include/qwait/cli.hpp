#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qwait {

// Runs the command-line tool with argv[1..] in `args`. Failures print one
// JSON line {"error": ...} to `err` and return non-zero.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qwait
