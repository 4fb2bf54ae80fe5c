#pragma once

#include <stdexcept>
#include <string>

namespace amploco {

// Bad or inconsistent configuration (model files, training config, clip schema).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/inf detected in a loss, gradient or state.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vector length does not match what the model or network expects.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace amploco
