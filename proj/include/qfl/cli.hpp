#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qfl {

// Runs the command line tool.  args excludes the program name.  Diagnostics
// go to err; requested data goes to files or to out.  Returns the process
// exit code: 0 success, 1 usage, 2 data error, 3 solver non-convergence.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qfl
