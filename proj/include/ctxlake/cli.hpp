#pragma once

#include <string>
#include <vector>

namespace ctxlake {

/// Command-line entry point: run | check | sweep. Returns the process exit
/// status: 0 clean, 1 violations or invalid outcomes found, 2 configuration
/// or parse errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace ctxlake
