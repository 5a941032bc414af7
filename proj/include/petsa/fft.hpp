#pragma once

#include <cstddef>

#include "petsa/tensor.hpp"

namespace petsa {

/// Spectrum of a real signal: bins 0..floor(n/2), the Hermitian-redundant
/// upper half dropped. real and imag share a shape whose last axis is the
/// bin count; length is the original signal length n.
struct ComplexSpectrum {
  Tensor real;
  Tensor imag;
  std::size_t length = 0;
};

/// Unnormalized forward DFT over the last axis of a real tensor (no 1/n
/// factor). Radix-2 fast path when n is a power of two, direct evaluation
/// otherwise. Differentiable: backward is the adjoint map restricted to the
/// stored bins, so gradients through any function of the spectrum are exact.
ComplexSpectrum rdft(const Tensor& x);

/// Elementwise modulus sqrt(re² + im²), differentiable, subgradient 0 where
/// the modulus is 0.
Tensor spectrum_abs(const ComplexSpectrum& s);

/// Hermitian-expanded energy sum over all n bins of the full spectrum,
/// reconstructed from the stored half. Parseval: for unnormalized DFT this
/// equals n · sum(x²).
double spectrum_energy(const ComplexSpectrum& s);

}  // namespace petsa
