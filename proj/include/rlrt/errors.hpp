#pragma once

#include <stdexcept>
#include <string>

namespace rlrt {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Aspect ratio outside the range where the asymptotic calibration holds.
class RegimeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A spike with |a - 1| <= sqrt(gamma) where a distant spike was required.
class CloseSpikeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// log|S| is undefined because the sample covariance has a zero eigenvalue.
class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical routine failed to meet its contract (quadrature, eigensolver).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, std::size_t line, std::size_t column, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ":" + std::to_string(column) +
                           ": " + what),
        path_(std::move(path)),
        line_(line),
        column_(column) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string path_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace rlrt
