#pragma once

#include <stdexcept>
#include <string>

namespace tdcf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed config, out-of-range field, unknown path.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to produce a result (no roots, no bracket).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The requested operation needs a stable below-threshold steady state.
class UnstableConfiguration : public Error {
 public:
  using Error::Error;
};

}  // namespace tdcf
