#pragma once

#include <stdexcept>
#include <string>

namespace capex {

// Base class for every error raised by the library. Callers that only care
// about "something was wrong with the input" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A variable declaration is malformed (empty or duplicate domain, bad role).
class InvalidVariable : public Error {
 public:
  using Error::Error;
};

// An instantiation does not bind a variable that the operation needs.
class MissingBinding : public Error {
 public:
  using Error::Error;
};

// A value is not in the variable's domain, or an index is out of range.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

// Scenario, reference or run configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace capex
