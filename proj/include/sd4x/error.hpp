#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sd4x {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files, arguments or configuration. The CLI maps it to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// External prediction process failed, timed out or answered garbage (exit 3).
class ExternalError : public Error {
 public:
  using Error::Error;
};

// A runtime self-check found a broken invariant (exit 1).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Normal equations could not be solved without regularization.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

class WidthMismatch : public InputError {
 public:
  WidthMismatch(std::size_t expected, std::size_t actual)
      : InputError("width mismatch: expected " + std::to_string(expected) +
                   " encoded columns, got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

}  // namespace sd4x
