#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace petsa::kernels {

/// Double-precision array kernels behind the tensor engine. Every entry has a
/// scalar reference implementation; SIMD variants are selected at runtime and
/// must agree with the reference: bitwise for add/sub/mul/scale/abs (same op
/// per element), to rounding for axpy/dot/sum and the GEMMs (FMA contraction
/// and reassociated accumulation).
///
/// Elementwise kernels allow r to alias x or y. GEMM kernels accumulate into c
/// (callers zero-fill when overwrite semantics are wanted); matrices are
/// row-major and must not alias.
struct Kernels {
  const char* name;

  void (*add)(const double* x, const double* y, double* r, std::size_t n);
  void (*sub)(const double* x, const double* y, double* r, std::size_t n);
  void (*mul)(const double* x, const double* y, double* r, std::size_t n);
  void (*scale)(const double* x, double k, double* r, std::size_t n);
  void (*abs)(const double* x, double* r, std::size_t n);
  /// y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);

  /// c[m×n] += a[m×k] · b[k×n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  /// c[m×n] += a[m×k] · b[n×k]ᵀ
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  /// c[m×n] += a[k×m]ᵀ · b[k×n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
};

/// Portable reference kernels.
const Kernels& scalar();

/// Variant in use. Picked once: PETSA_KERNELS env override if set, otherwise
/// the best variant the CPU supports.
const Kernels& active();

/// Force a variant by name ("scalar", "avx2", "neon"). Returns false and
/// leaves the selection unchanged if the variant is not available on this
/// machine. Intended for tests and benchmarking.
bool select(std::string_view name);

/// Names of the variants usable on this machine (reference first).
std::vector<std::string> available();

}  // namespace petsa::kernels
