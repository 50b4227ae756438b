#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace okl {

/// Malformed input text (dataset, Gram, model or config files).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a contract (bad labels, asymmetric Gram, unknown task, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver-side numerical failure: non-finite objective, cache drift, failed bracketing.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace okl
