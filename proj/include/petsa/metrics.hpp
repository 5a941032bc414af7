#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "petsa/tensor.hpp"

namespace petsa {

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::runtime_error("mse: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double mae(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::runtime_error("mae: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline double mse(const Tensor& a, const Tensor& b) { return mse(a.values(), b.values()); }
inline double mae(const Tensor& a, const Tensor& b) { return mae(a.values(), b.values()); }

}  // namespace petsa
