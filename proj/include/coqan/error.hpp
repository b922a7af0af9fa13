#pragma once

#include <stdexcept>
#include <string>

namespace coqan {

// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record (bad JSON, wrong field type, missing field).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace coqan
