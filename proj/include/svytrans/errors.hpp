#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace svytrans {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input files do not match the declared column roles.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A record or dataset violates a data-model invariant. Carries the
/// 1-based data row number when the violation is tied to a single row.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<std::size_t> row = std::nullopt)
      : Error(row ? "row " + std::to_string(*row) + ": " + what : what),
        row_(row) {}

  std::optional<std::size_t> row() const { return row_; }

  /// Same error with `context` prepended to the message.
  ValidationError with_context(const std::string& context) const {
    return ValidationError(context + ": " + what(), row_, Raw{});
  }

 private:
  struct Raw {};
  ValidationError(const std::string& full, std::optional<std::size_t> row, Raw)
      : Error(full), row_(row) {}

  std::optional<std::size_t> row_;
};

/// Malformed configuration (CLI flags, scenario grids, schema files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during fitting or estimation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public NumericalError {
 public:
  SeparationError(const std::string& what, std::string covariate)
      : NumericalError(what), covariate_(std::move(covariate)) {}
  const std::string& covariate() const { return covariate_; }

 private:
  std::string covariate_;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : NumericalError(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

}  // namespace svytrans
