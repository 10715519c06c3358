#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nssr {

// Root of every error the library throws. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or channel counts that do not line up.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Out-of-range or otherwise invalid scalar arguments.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible serialized data. `offset` is the byte position at
// which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite values produced by training or inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nssr
