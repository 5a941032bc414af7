#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petsa/tensor.hpp"

namespace petsa {

enum class Side : std::uint8_t { input = 0, output = 1 };

/// Gated low-rank residual calibration over a [B×S×V] signal:
///
///   out[:,:,v] = z[:,:,v] + tanh(alpha[v]·z[:,:,v]) · (A·B[:,:,v]) + b[:,v]
///
/// A is Xavier-normal, B and b start at zero, so a fresh module is an exact
/// residual identity. The [S×S] per-variable map A·B[:,:,v] is never
/// materialized; calibrate contracts through the rank-r factor instead.
struct CalibrationModule {
  Side side = Side::input;
  std::size_t S = 0, V = 0, r = 0;
  Tensor alpha;  // [V]
  Tensor A;      // [S×r]
  Tensor B;      // [r×S×V]
  Tensor b;      // [S×V]
};

/// alpha = alpha0·ones, A ~ N(0, 2/(S+r)) under seed, B = b = 0.
CalibrationModule init_calibration(Side side, std::size_t S, std::size_t V, std::size_t r,
                                   double alpha0, std::uint64_t seed);

/// Apply the module to z [B×S×V]; differentiable w.r.t. z and all four
/// parameter tensors.
Tensor calibrate(const CalibrationModule& m, const Tensor& z);

/// S·r + r·S·V + S·V + V
std::size_t param_count(const CalibrationModule& m);

/// The four learnable tensors, for optimizers: {alpha, A, B, b}.
std::vector<Tensor> calibration_params(const CalibrationModule& m);

void set_trainable(CalibrationModule& m, bool trainable);

/// Same container conventions as forecaster checkpoints (versioned binary,
/// trailing checksum, bitwise round trip).
void save_calibration(const CalibrationModule& m, const std::string& path);
CalibrationModule load_calibration(const std::string& path);

}  // namespace petsa
