#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mtalk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;     // invalid arguments, config or input
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitTransport = 3;

// Entry point of the mtalk command. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtalk::cli
