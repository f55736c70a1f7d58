#pragma once

#include <stdexcept>
#include <string>

namespace ftscope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf was produced by an operation.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (mode, spec, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (manifest, CSV, PPM, params blob).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input is valid in shape but numerically degenerate (e.g. zero-variance features).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftscope
