#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dfa {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitSampler = 4;

// Runs one command line (args[0] is the program name). Results go to files
// and `out`; failures print a JSON error object to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dfa
