#pragma once

#include <string>
#include <vector>

namespace steadapt {

// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence.
int run_cli(const std::vector<std::string>& args);

}  // namespace steadapt
