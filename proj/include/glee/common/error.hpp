#pragma once

#include <stdexcept>
#include <string>

namespace glee {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: manifests, landmark files, shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed factorizations, unnormalizable vectors.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class AlignmentDegenerate : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class BehindCamera : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CorruptCheckpoint : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VersionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace glee
