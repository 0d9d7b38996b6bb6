#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdosr {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A NaN or Inf appeared where finite values are required (inputs, losses).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model used before the training stage that populates it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace rdosr
