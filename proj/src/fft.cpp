#include "petsa/fft.hpp"

#include <cmath>
#include <vector>

#include "petsa/errors.hpp"

namespace petsa {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// In-place iterative radix-2 complex FFT (forward, negative exponent).
void fft_pow2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const double wr = std::cos(ang * static_cast<double>(j));
        const double wi = std::sin(ang * static_cast<double>(j));
        const std::size_t u = i + j, v = i + j + half;
        const double tr = wr * re[v] - wi * im[v];
        const double ti = wr * im[v] + wi * re[v];
        re[v] = re[u] - tr;
        im[v] = im[u] - ti;
        re[u] += tr;
        im[u] += ti;
      }
    }
  }
}

// Single-period twiddle tables; entry j is the angle 2πj/n.
void make_tables(std::size_t n, std::vector<double>& cos_tab, std::vector<double>& sin_tab) {
  cos_tab.resize(n);
  sin_tab.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double ang = kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    cos_tab[j] = std::cos(ang);
    sin_tab[j] = std::sin(ang);
  }
}

}  // namespace

ComplexSpectrum rdft(const Tensor& x) {
  if (x.rank() == 0) {
    throw DimensionError("rdft: input has no transform axis");
  }
  const std::size_t n = x.shape().back();
  if (n == 0) {
    throw DimensionError("rdft: transform axis is empty");
  }
  const std::size_t rows = x.size() / n;
  const std::size_t bins = n / 2 + 1;
  Shape out_shape = x.shape();
  out_shape.back() = bins;

  ComplexSpectrum s;
  s.real = Tensor::zeros(out_shape);
  s.imag = Tensor::zeros(out_shape);
  s.length = n;

  const double* xv = x.data();
  double* rv = s.real.data();
  double* iv = s.imag.data();
  const bool pow2 = (n & (n - 1)) == 0;

  std::vector<double> cos_tab, sin_tab;
  if (!pow2) make_tables(n, cos_tab, sin_tab);

  if (pow2) {
    std::vector<double> re(n), im(n);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(xv + r * n, xv + (r + 1) * n, re.begin());
      std::fill(im.begin(), im.end(), 0.0);
      fft_pow2(re, im);
      std::copy(re.begin(), re.begin() + bins, rv + r * bins);
      std::copy(im.begin(), im.begin() + bins, iv + r * bins);
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = xv + r * n;
      for (std::size_t k = 0; k < bins; ++k) {
        double sr = 0.0, si = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
          sr += row[t] * cos_tab[idx];
          si -= row[t] * sin_tab[idx];
          idx += k;
          if (idx >= n) idx -= n;
        }
        rv[r * bins + k] = sr;
        iv[r * bins + k] = si;
      }
    }
  }

  if (!Tape::active() || !x.requires_grad()) return s;
  Tape* tape = Tape::active();
  s.real.set_requires_grad(true);
  s.imag.set_requires_grad(true);
  tape->touch(s.real.impl());
  tape->touch(s.imag.impl());
  tape->touch(x.impl());
  if (pow2) make_tables(n, cos_tab, sin_tab);
  auto xi = x.impl(), ri = s.real.impl(), ii = s.imag.impl();
  tape->record([=, cos_tab = std::move(cos_tab), sin_tab = std::move(sin_tab)]() {
    // adjoint of the stored-bins map: gx[t] += Σ_k gR_k cos(2πkt/n) − gI_k sin(2πkt/n)
    double* gx = xi->grad.data();
    const double* gr = ri->grad.data();
    const double* gi = ii->grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double a = gr[r * bins + k];
        const double b = gi[r * bins + k];
        if (a == 0.0 && b == 0.0) continue;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
          gx[r * n + t] += a * cos_tab[idx] - b * sin_tab[idx];
          idx += k;
          if (idx >= n) idx -= n;
        }
      }
    }
  });
  return s;
}

Tensor spectrum_abs(const ComplexSpectrum& s) {
  const std::size_t n = s.real.size();
  Tensor out = Tensor::zeros(s.real.shape());
  const double* rv = s.real.data();
  const double* iv = s.imag.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = std::sqrt(rv[i] * rv[i] + iv[i] * iv[i]);

  Tape* tape = Tape::active();
  if (!tape || (!s.real.requires_grad() && !s.imag.requires_grad())) return out;
  out.set_requires_grad(true);
  tape->touch(out.impl());
  const bool nr = s.real.requires_grad(), ni = s.imag.requires_grad();
  if (nr) tape->touch(s.real.impl());
  if (ni) tape->touch(s.imag.impl());
  auto ri = s.real.impl(), ii = s.imag.impl(), oi = out.impl();
  tape->record([=]() {
    const double* g = oi->grad.data();
    const double* mag = oi->data.data();
    for (std::size_t i = 0; i < oi->data.size(); ++i) {
      if (mag[i] == 0.0) continue;  // subgradient 0 at the origin
      const double f = g[i] / mag[i];
      if (nr) ri->grad[i] += f * ri->data[i];
      if (ni) ii->grad[i] += f * ii->data[i];
    }
  });
  return out;
}

double spectrum_energy(const ComplexSpectrum& s) {
  const std::size_t n = s.length;
  const std::size_t bins = n / 2 + 1;
  const std::size_t rows = s.real.size() / bins;
  const double* rv = s.real.data();
  const double* iv = s.imag.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < bins; ++k) {
      // bins other than DC (and Nyquist for even n) appear twice in the
      // full Hermitian spectrum
      const bool shared = (k == 0) || (n % 2 == 0 && k == n / 2);
      const double w = shared ? 1.0 : 2.0;
      const double re = rv[r * bins + k], im = iv[r * bins + k];
      total += w * (re * re + im * im);
    }
  }
  return total;
}

}  // namespace petsa
