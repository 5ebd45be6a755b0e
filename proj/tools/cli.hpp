#pragma once

#include <string>
#include <vector>

namespace ecoassoc::cli {

/// Runs one command line (argv[0] excluded) and returns the process exit
/// code: 0 success, 2 usage or validation error, 3 numerical failure.
int run(const std::vector<std::string> &args);

} // namespace ecoassoc::cli
