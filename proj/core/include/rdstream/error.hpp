#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdstream {

enum class ErrorCategory {
  kDimension = 1,
  kInitialization,
  kDivergence,
  kParse,
  kEvaluation,
  kIo,
  kConfig,
};

const char* to_string(ErrorCategory category) noexcept;

/// Base class of every error thrown by the library. The category is stable and
/// is what the command line tool maps onto its exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorCategory::kDimension, what) {}
};

class InitializationError : public Error {
 public:
  explicit InitializationError(const std::string& what)
      : Error(ErrorCategory::kInitialization, what) {}
};

/// Raised when a reaction-diffusion trajectory leaves the finite range.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error(ErrorCategory::kDivergence, what), step_(step) {}

  /// Index of the first time slice that could not be produced.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what)
      : Error(ErrorCategory::kParse, what) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what)
      : Error(ErrorCategory::kEvaluation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

}  // namespace rdstream
