#pragma once

#include <stdexcept>
#include <string>

namespace convlens {

// Malformed input files, schema mismatches, truncated payloads.
// The CLI maps these to exit code 2; usage problems exit 1.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace convlens
