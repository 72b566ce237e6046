#pragma once

#include <stdexcept>
#include <string>

namespace planekit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied input: configuration values, file contents, sizes.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
  using Error::Error;
};

class PreconditionError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class InvalidConfig : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class SchemaError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class BadFormat : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class OutOfRange : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class LabelOutOfRange : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// Geometric failures.
class DegeneratePlane : public Error {
public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
public:
  using Error::Error;
};

class NoPlaneFound : public Error {
public:
  using Error::Error;
};

class NonPositiveDepth : public Error {
public:
  using Error::Error;
};

class EmptyRegion : public Error {
public:
  using Error::Error;
};

class CameraOutsideRoom : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class EmptySplit : public Error {
public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace planekit
