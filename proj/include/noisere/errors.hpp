#pragma once

#include <stdexcept>
#include <string>

namespace noisere {

// Error taxonomy maps onto the CLI exit codes: usage errors exit 1,
// data errors exit 2, numerical aborts exit 3.

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between tensors. Messages name both shapes.
struct DimensionError : UsageError {
  using UsageError::UsageError;
};

// Malformed or inconsistent input data (corpus files, checkpoints, configs).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate distributions, aborted optimization steps.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace noisere
