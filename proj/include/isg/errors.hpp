#pragma once

#include <stdexcept>

namespace isg {

// Error categories map onto process exit codes (see cli.cpp): config errors
// exit 2, data errors 3, numerical failures 4. Precondition violations use
// std::invalid_argument.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace isg
