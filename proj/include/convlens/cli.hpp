#pragma once

#include <string>
#include <vector>

namespace convlens {

// Runs one CLI invocation (argv without the program name). Returns the
// process exit code: 0 success, 1 usage error, 2 data/parse error.
int dispatch(const std::vector<std::string>& args);

}  // namespace convlens
