#pragma once

#include <cstddef>

#include "petsa/tensor.hpp"

namespace petsa {

enum class LossMode { partial, total };

struct LossConfig {
  double delta = 0.5;            // Huber threshold
  double beta = 0.1;             // frequency-term weight
  std::size_t patch_len = 16;    // patch length P
  std::size_t patch_stride = 0;  // 0 means patch_len (non-overlapping)
};

/// Composite loss breakdown. `total` stays a graph node so callers can run
/// backward through it; the per-term doubles are detached readings.
struct LossReport {
  Tensor total;
  double huber = 0.0;
  double freq = 0.0;
  double patch = 0.0;
  std::size_t n_observed = 0;
  bool patch_skipped = false;
};

/// Mean over all elements of 0.5·e² where |e| < delta, else delta·(|e| − delta/2).
/// At |e| = delta both branches agree in value (0.5·delta²) and in one-sided
/// derivative (delta).
Tensor huber_loss(const Tensor& pred, const Tensor& target, double delta);

/// Mean complex modulus of the per-bin spectral difference of pred and target
/// [B×S×V], transformed along the time axis; averages over batch, variables,
/// and the stored bins 0..⌊S/2⌋. Subgradient 0 where the spectra coincide.
Tensor frequency_loss(const Tensor& pred, const Tensor& target);

/// Splits each (batch, variable) sequence into length-P patches along time
/// (stride 0 means P, trailing remainder dropped) and compares aligned pairs:
/// 1 − PearsonCorr (0 when either patch is constant), squared mean gap, and
/// squared population-variance gap. Each term is averaged over every patch,
/// then the three are summed.
Tensor patch_loss(const Tensor& pred, const Tensor& target, std::size_t patch_len,
                  std::size_t patch_stride = 0);

/// Full composite over an observed prefix. `pred` is [B×H×V]; `target` holds
/// the first p ≤ H horizon steps and every term sees only those p steps. In
/// total mode p must equal H. The patch term is skipped (and flagged) when
/// p < patch_len, and the frequency transform is skipped when beta = 0.
/// total = huber + patch + beta·freq, composed in exactly that order.
LossReport petsa_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg,
                      LossMode mode);

}  // namespace petsa
