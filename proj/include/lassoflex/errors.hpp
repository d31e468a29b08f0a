#pragma once

#include <stdexcept>
#include <string>

namespace lfn {

// Exit-code families used by the CLI: config -> 2, data -> 3, numeric -> 4.

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not line up for an operation.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (shape of shadow copies, feature
/// counts, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct EncodingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace lfn
