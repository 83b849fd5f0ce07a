#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gxlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with user-supplied input (expressions, configs, problem specs).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Failures of a numerical procedure on otherwise valid input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(std::size_t offset, const std::string& what)
      : InputError("SyntaxError at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifier : public InputError {
 public:
  using InputError::InputError;
};

class ArityMismatch : public InputError {
 public:
  using InputError::InputError;
};

class MissingBinding : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class UnsupportedArity : public InputError {
 public:
  using InputError::InputError;
};

class ScenarioOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

/// Raised when a config file fails validation; `path()` is a JSON pointer.
class ConfigError : public InputError {
 public:
  ConfigError(std::string path, const std::string& what)
      : InputError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnboundedDetected : public NumericError {
 public:
  using NumericError::NumericError;
};

class CflViolation : public NumericError {
 public:
  explicit CflViolation(const std::string& what) : NumericError("CflViolation: " + what) {}
};

class NonFiniteValue : public NumericError {
 public:
  explicit NonFiniteValue(const std::string& what) : NumericError("NonFiniteValue: " + what) {}
};

class LipschitzBlowup : public NumericError {
 public:
  explicit LipschitzBlowup(const std::string& what) : NumericError("LipschitzBlowup: " + what) {}
};

class BudgetExceeded : public NumericError {
 public:
  explicit BudgetExceeded(const std::string& what) : NumericError("BudgetExceeded: " + what) {}
};

class FitIllConditioned : public NumericError {
 public:
  explicit FitIllConditioned(const std::string& what) : NumericError("FitIllConditioned: " + what) {}
};

class InconclusiveTolerance : public NumericError {
 public:
  explicit InconclusiveTolerance(const std::string& what)
      : NumericError("InconclusiveTolerance: " + what) {}
};

}  // namespace gxlab
