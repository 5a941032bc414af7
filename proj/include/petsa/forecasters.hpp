#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petsa/dataio.hpp"
#include "petsa/tensor.hpp"

namespace petsa {

enum class BackboneKind : std::uint8_t { ols = 0, dlinear = 1, mlp = 2 };

const char* kind_name(BackboneKind k);
BackboneKind kind_from_name(const std::string& name);

/// A frozen channel-independent forecaster. Parameters never require
/// gradients; predict stays differentiable w.r.t. its input so calibration
/// gradients can flow through.
///
/// Per-channel parameters (V entries per group):
///   ols:     w1 = map [L×H], b1 = intercept [1×H]
///   dlinear: w1 = trend map [L×H], w2 = remainder map [L×H]
///   mlp:     w1 [L×hidden], b1 [1×hidden], w2 [hidden×H], b2 [1×H]
struct Forecaster {
  BackboneKind kind = BackboneKind::ols;
  std::size_t L = 0, H = 0, V = 0;
  std::size_t hidden = 0;  // mlp
  std::size_t kernel = 0;  // dlinear moving-average width

  std::vector<Tensor> w1, b1, w2, b2;
  Tensor smooth;  // dlinear only: [L×L], x·smooth = centered moving average

  // norm provenance of the training data
  std::string dataset;
  std::size_t train_end = 0;
  std::vector<double> norm_mean, norm_std;
};

/// Closed-form ridge regression per channel on centered data. With lambda=0
/// a singular system raises a numerical error suggesting lambda>0.
Forecaster fit_ols(const std::vector<WindowPair>& train, double ridge_lambda = 1e-3);

/// Trend/remainder decomposition (centered moving average, edge-replicated)
/// with two linear maps per channel, trained by mini-batch Adam on MSE.
/// Deterministic: fixed internal shuffling seed.
Forecaster fit_dlinear(const std::vector<WindowPair>& train, std::size_t kernel = 25,
                       std::size_t epochs = 20, double lr = 1e-2, std::size_t batch = 256);

/// Per-channel two-layer tanh network trained by mini-batch Adam on MSE.
/// Bitwise deterministic under seed.
Forecaster fit_mlp(const std::vector<WindowPair>& train, std::size_t hidden = 64,
                   std::size_t epochs = 20, double lr = 1e-3, std::uint64_t seed = 0,
                   std::size_t batch = 256);

/// [B×L×V] -> [B×H×V]; differentiable w.r.t. x only.
Tensor predict(const Forecaster& f, const Tensor& x);

/// Record where the forecaster's normalization came from.
void stamp_provenance(Forecaster& f, const Dataset& ds);

/// Versioned binary container with a trailing checksum; round trip is
/// bitwise exact. save writes via a temp file + rename.
void save_checkpoint(const Forecaster& f, const std::string& path);
Forecaster load_checkpoint(const std::string& path);

/// checkpoints/{dataset}_{kind}_L{L}_H{H}.ckpt under the given root.
std::string checkpoint_path(const std::string& root, const std::string& dataset,
                            BackboneKind kind, std::size_t L, std::size_t H);

}  // namespace petsa
