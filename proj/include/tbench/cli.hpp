#pragma once

#include <string>
#include <vector>

namespace tbench {

/// Entry point of the transient-bench command line. Exit codes: 0 success,
/// 2 usage/config errors, 3 numeric faults during a run.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args); // args without program name

} // namespace tbench
