#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrr {

// Exit codes: 0 success, 1 input error, 2 model failure or no signal.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitModel = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mrr
