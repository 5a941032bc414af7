// AVX2+FMA kernel variants. This TU is compiled with -mavx2 -mfma on x86-64;
// the dispatcher only installs it after a runtime CPU check.

#include "petsa/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace petsa::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void add_v(const double* x, const double* y, double* r, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(r + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) r[i] = x[i] + y[i];
}

void sub_v(const double* x, const double* y, double* r, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(r + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) r[i] = x[i] - y[i];
}

void mul_v(const double* x, const double* y, double* r, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(r + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) r[i] = x[i] * y[i];
}

void scale_v(const double* x, double k, double* r, std::size_t n) {
  const __m256d kk = _mm256_set1_pd(k);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(r + i, _mm256_mul_pd(kk, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) r[i] = k * x[i];
}

void abs_v(const double* x, double* r, std::size_t n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(r + i, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) r[i] = std::fabs(x[i]);
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
  const __m256d aa = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(aa, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_v(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double r = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

double sum_v(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

void gemm_nn_v(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d aip = _mm256_set1_pd(a[i * k + p]);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(aip, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
      }
      const double as = a[i * k + p];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

void gemm_nt_v(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_v(arow, b + j * k, k);
  }
}

void gemm_tn_v(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d api = _mm256_set1_pd(a[p * m + i]);
      double* crow = c + i * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(api, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
      }
      const double as = a[p * m + i];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

}  // namespace

const Kernels* avx2_kernels() {
  static const Kernels k = {
      "avx2", add_v,  sub_v,     mul_v,     scale_v,   abs_v,
      axpy_v, dot_v,  sum_v,     gemm_nn_v, gemm_nt_v, gemm_tn_v,
  };
  return &k;
}

}  // namespace petsa::kernels

#else

namespace petsa::kernels {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace petsa::kernels

#endif
