#pragma once

#include <stdexcept>
#include <string>

namespace ppde {

// Rejected input: shape mismatches, out-of-range indices, bad parameter values.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Drift bound incompatible with the step size: one-step probabilities
// (1 +- lambda*sqrt(h))/2 leave [0,1] when |lambda|*sqrt(h) > 1.
struct invalid_drift_error : input_error {
  using input_error::input_error;
};

// Numerical failure inside a recursion (NaN propagation, blow-up).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ppde
