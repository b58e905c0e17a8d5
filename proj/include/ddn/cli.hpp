#pragma once

#include <string>
#include <vector>

namespace ddn::cli {

// Full command-line pipeline, callable in-process. args excludes the program
// name. Returns the process exit code: 0 success, 1 usage, 2 data error,
// 3 numeric failure.
int run(const std::vector<std::string>& args);

}  // namespace ddn::cli
