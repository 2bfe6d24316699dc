#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dalc::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kInternalError = 2;

// Runs the `dalc` command line; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dalc::cli
