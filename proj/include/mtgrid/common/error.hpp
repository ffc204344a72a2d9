#pragma once

#include <stdexcept>
#include <string>

namespace mtgrid {

// Base class for every error raised by the library. Messages are single-line
// so the CLI can print them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unsatisfiable caller input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File system or serialization failures; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// A numeric computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtgrid
