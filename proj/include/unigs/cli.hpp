#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unigs::cli {

enum ExitCode : int { kOk = 0, kInternalError = 1, kUsageError = 2 };

// Runs one invocation of the `unigs` tool. `args` excludes the program
// name. Usage and input errors return 2, anything else that fails returns 1.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace unigs::cli
