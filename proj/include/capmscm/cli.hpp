#pragma once

// Batch commands: simulate, replicate-fig3, check-dag and diagnose.

#include <iosfwd>
#include <string>
#include <vector>

namespace capmscm::cli {

enum ExitCode : int { ok = 0, validation = 1, runtime = 2, tolerance = 3 };

/// Runs one command; `args` excludes the program name. Errors are written to
/// `err` as a one-line JSON object {"error": code, "message": text}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace capmscm::cli
