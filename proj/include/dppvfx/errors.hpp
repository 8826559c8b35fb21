#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dppvfx {

/// Base class for every error raised by the library. `exit_code()` is the
/// status the command-line front end returns for this error family.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
  virtual const char* kind() const noexcept { return "error"; }
};

/// Bad parameters, malformed configuration, out-of-range inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "invalid_input"; }
};

class BoundsError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
  const char* kind() const noexcept override { return "bounds"; }
};

/// Malformed kernel / point / sketch file. Row and column are 1-based,
/// 0 when not applicable.
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : InvalidInput(location(what, row, col)), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  static std::string location(const std::string& what, std::size_t row, std::size_t col) {
    if (row == 0) return what;
    std::string s = what + " (row " + std::to_string(row);
    if (col != 0) s += ", column " + std::to_string(col);
    return s + ")";
  }
  std::size_t row_;
  std::size_t col_;
};

/// Factorization failures, non-convergence, invariant violations caused by
/// floating point.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, long iterations = -1)
      : Error(what), iterations_(iterations) {}
  long iterations() const noexcept { return iterations_; }
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "numeric"; }

 private:
  long iterations_;
};

class DegenerateSketchError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "degenerate_sketch"; }
};

/// The k-DPP size target cannot be reached with the current dictionary.
class CalibrationError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "calibration"; }
};

/// Rejection loop ran out of budget. Carries the quantities needed to
/// diagnose a poor sketch.
class RejectionBudgetError : public Error {
 public:
  RejectionBudgetError(const std::string& what, double s_hat, double s_tilde, std::uint64_t rejections)
      : Error(what), s_hat_(s_hat), s_tilde_(s_tilde), rejections_(rejections) {}
  double s_hat() const noexcept { return s_hat_; }
  double s_tilde() const noexcept { return s_tilde_; }
  std::uint64_t rejections() const noexcept { return rejections_; }
  int exit_code() const noexcept override { return 4; }
  const char* kind() const noexcept override { return "rejection_budget"; }

 private:
  double s_hat_;
  double s_tilde_;
  std::uint64_t rejections_;
};

/// k-DPP size rejection ran out of budget; `histogram()[j]` counts draws of size j.
class SizeBudgetError : public Error {
 public:
  SizeBudgetError(const std::string& what, std::vector<std::uint64_t> histogram)
      : Error(what), histogram_(std::move(histogram)) {}
  const std::vector<std::uint64_t>& histogram() const noexcept { return histogram_; }
  int exit_code() const noexcept override { return 4; }
  const char* kind() const noexcept override { return "size_budget"; }

 private:
  std::vector<std::uint64_t> histogram_;
};

}  // namespace dppvfx
