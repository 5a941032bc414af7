#pragma once

#include <stdexcept>
#include <string>

namespace petsa {

/// Shape or axis disagreement between operands.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or unusable input data (CSV cells, checkpoint files, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: divergence, non-finite values, singular systems.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace petsa
