#pragma once

#include <string>
#include <vector>

namespace fsv {

// Batch command-line surface: simulate, fit, predict, backtest, evaluate,
// plotdata. Returns the process exit code.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace fsv
