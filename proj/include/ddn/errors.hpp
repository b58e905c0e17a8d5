#pragma once

#include <stdexcept>
#include <string>

namespace ddn {

// Malformed or inconsistent input data (CSV rows, profiles, fleet layout).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Hard numeric failure (NaN/Inf in a loss or gradient).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ddn
