#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cascade {

// Runs one command. `args` excludes the program name. Diagnostics go to
// `err`; normal output and file names go to `out`. Returns the process exit
// code: 0 success, 2 bad input or parse error, 3 admissibility failure,
// 4 numeric or I/O failure.
int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace cascade
