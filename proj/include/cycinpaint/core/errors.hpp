#pragma once

#include <stdexcept>
#include <string>

namespace cycinpaint {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched or unsupported tensor/image/mask dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file decoded but its content is not what the caller asked for.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inputs that are well-formed but leave an operation undefined.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace cycinpaint
