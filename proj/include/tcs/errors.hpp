#pragma once

#include <stdexcept>
#include <string>

namespace tcs {

// Bad caller input: shapes, ranges, non-finite entries.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// W(p,T) is not positive definite within tolerance at the requested point.
class FeasibilityError : public std::runtime_error {
public:
  FeasibilityError(const std::string& what, double lambda_min)
      : std::runtime_error(what), lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

private:
  double lambda_min_;
};

// Quadrature ran out of refinement budget before reaching its target.
class AccuracyError : public std::runtime_error {
public:
  AccuracyError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

class LineSearchError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input file problems; line/column are 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace tcs
