#pragma once

#include <stdexcept>
#include <string>

namespace clg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document: syntax errors carry a line/column, field errors a path.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments: unknown node ids, partial assignments, wrong kinds.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Structural problem with a network (cycle, invalid topology).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown, e.g. an observed covariance block that stays
/// singular after jitter escalation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Errors that belong to the inference domain rather than to the caller.
class InferenceError : public Error {
 public:
  using Error::Error;
};

class ImpossibleEvidenceError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class EmptyMixtureError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class CapExceededError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class UnsupportedStructureError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class InitializationError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class DegenerateResultError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

class TrackingLostError : public InferenceError {
 public:
  TrackingLostError(const std::string& what, int step)
      : InferenceError(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace clg
