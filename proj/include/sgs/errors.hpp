#pragma once

#include <stdexcept>

namespace sgs {

// Shape/dimension contract violations between tensors and operators.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bin counts, layer stacks, CLI options.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File and serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sgs
