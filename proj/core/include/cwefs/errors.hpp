#pragma once

#include <stdexcept>
#include <string>

namespace cwefs {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameter or configuration value. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, malformed or inconsistent input data. Maps to CLI exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or other numerical breakdown. Maps to CLI exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cwefs
