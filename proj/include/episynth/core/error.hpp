#pragma once

#include <stdexcept>
#include <string>

namespace episynth {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model or run configuration (unknown node, unbound stream, bad flag).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// A functional node produced a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(std::string node, const std::string& what)
      : Error("evaluation of node '" + node + "' failed: " + what), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

class CycleError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// Euler step produced a negative compartment.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Parameters fall into a regime where the model is not defined (e.g. escape probability <= 0).
class ParameterRegimeError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

/// All particle weights vanished.
class DegenerateEnsembleError : public Error {
 public:
  using Error::Error;
};

class SplitDesignError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// Pooled density has zero mass (e.g. disjoint supports under logarithmic pooling).
class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

class UndefinedPValueError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what) : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Manifest does not match the expected schema.
class SchemaError : public ConfigurationError {
 public:
  SchemaError(std::string field, const std::string& what)
      : ConfigurationError("manifest field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace episynth
