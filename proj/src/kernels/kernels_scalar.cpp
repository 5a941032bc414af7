#include "petsa/kernels.hpp"

#include <cmath>

namespace petsa::kernels {
namespace {

void add_s(const double* x, const double* y, double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) r[i] = x[i] + y[i];
}

void sub_s(const double* x, const double* y, double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) r[i] = x[i] - y[i];
}

void mul_s(const double* x, const double* y, double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) r[i] = x[i] * y[i];
}

void scale_s(const double* x, double k, double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) r[i] = k * x[i];
}

void abs_s(const double* x, double* r, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) r[i] = std::fabs(x[i]);
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_s(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_s(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void gemm_nn_s(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nt_s(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] += dot_s(arow, b + j * k, k);
    }
  }
}

void gemm_tn_s(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

}  // namespace

const Kernels& scalar() {
  static const Kernels k = {
      "scalar", add_s,  sub_s,     mul_s,     scale_s,   abs_s,
      axpy_s,   dot_s,  sum_s,     gemm_nn_s, gemm_nt_s, gemm_tn_s,
  };
  return k;
}

}  // namespace petsa::kernels
