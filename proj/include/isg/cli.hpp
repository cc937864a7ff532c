#pragma once

#include <string>
#include <vector>

namespace isg {

// Entry point behind the binary; exposed so tests can drive commands without
// spawning processes. Exit codes: 0 success, 2 config error, 3 data error,
// 4 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace isg
