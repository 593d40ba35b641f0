#pragma once

#include <stdexcept>
#include <string>

namespace tpvd {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto its exit-code protocol.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two inputs disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Value not representable in the target encoding.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Prediction does not cover the evaluation set.
class EvaluationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Malformed file, tensor table, or config.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tpvd
