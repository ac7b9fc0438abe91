#pragma once

#include <stdexcept>
#include <string>

namespace aqua {

// Inputs outside the documented domain (negative density, out-of-range pixel...).
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad sample counts, shape mismatches, unknown keys).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (missing cached state, empty batches, mismatched lengths).
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aqua
