#pragma once

#include <stdexcept>
#include <string>

namespace lensless {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: shapes, ranges, unreadable files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: singular systems, divergence, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lensless
