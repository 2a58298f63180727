#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scoreline::cli {

enum ExitCode { ok = 0, usage = 1, parse_failure = 2, analysis_failure = 3 };

/// Runs one command line (without the program name). Reads `-` inputs from
/// `in`, writes results to `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace scoreline::cli
