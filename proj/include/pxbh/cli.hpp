#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pxbh::cli {

/// Process exit codes of the `pxbh` tool.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kParseOrIo = 2,
    kVerifyFailed = 3,
    kDeadlock = 4,
};

/// Runs one `pxbh` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pxbh::cli
