#pragma once

#include <stdexcept>
#include <string>

namespace smile {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value (even kernel size, bad weights, bad step...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller violated an operation's contract (non-scalar loss, zero-energy cube).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Data could not be generated or is degenerate (rank-deficient cube, failed resampling).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undefined numerical result (zero-loss ratio, zero-vector angle, non-finite probe).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss; carries the iteration and the offending term.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, std::string term)
      : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration) +
                           " (term " + term + ")"),
        iteration_(iteration),
        term_(std::move(term)) {}
  int iteration() const { return iteration_; }
  const std::string& term() const { return term_; }

 private:
  int iteration_;
  std::string term_;
};

}  // namespace smile
