#pragma once

#include <stdexcept>

namespace armcast {

/// Non-finite loss or other numerical breakdown during training.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace armcast
