#include "petsa/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "petsa/errors.hpp"
#include "petsa/fft.hpp"

namespace petsa {
namespace {

// Variance at or below this is treated as a constant patch. Exactly constant
// inputs land here too: summation rounding leaves their computed variance
// around 1e-34, not always at literal zero.
constexpr double kConstVarThreshold = 1e-24;

// Keeps the Pearson denominator away from zero for patches the constancy mask
// zeroes out anyway; orders of magnitude below any real variance product.
constexpr double kDenomFloor = 1e-24;

void require_same_shape(const Tensor& pred, const Tensor& target, const char* who) {
  if (pred.shape() != target.shape()) {
    throw DimensionError(std::string(who) + ": pred and target shapes differ");
  }
}

void require_bsv(const Tensor& t, const char* who) {
  if (t.rank() != 3) {
    throw DimensionError(std::string(who) + ": expected a [BxSxV] tensor");
  }
}

}  // namespace

Tensor huber_loss(const Tensor& pred, const Tensor& target, double delta) {
  require_same_shape(pred, target, "huber_loss");
  if (!(delta > 0.0)) throw std::invalid_argument("huber_loss: delta must be > 0");

  Tensor e = sub(pred, target);
  Tensor quad_mask = Tensor::zeros(e.shape());
  Tensor lin_mask = Tensor::zeros(e.shape());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const bool quad = std::fabs(e.data()[i]) < delta;
    quad_mask.data()[i] = quad ? 1.0 : 0.0;
    lin_mask.data()[i] = quad ? 0.0 : 1.0;
  }
  Tensor quad = scale(mul(e, e), 0.5);
  Tensor lin = sub(scale(abs(e), delta), Tensor::scalar(0.5 * delta * delta));
  return reduce_mean(add(mul(quad_mask, quad), mul(lin_mask, lin)));
}

Tensor frequency_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "frequency_loss");
  require_bsv(pred, "frequency_loss");
  // F(pred) − F(target) = F(pred − target); the transform wants time last.
  ComplexSpectrum spec = rdft(transpose_12(sub(pred, target)));
  return reduce_mean(spectrum_abs(spec));
}

Tensor patch_loss(const Tensor& pred, const Tensor& target, std::size_t patch_len,
                  std::size_t patch_stride) {
  require_same_shape(pred, target, "patch_loss");
  require_bsv(pred, "patch_loss");
  const std::size_t S = pred.shape()[1];
  if (patch_len < 1 || patch_len > S) {
    throw DimensionError("patch_loss: patch_len " + std::to_string(patch_len) +
                         " must lie in [1, " + std::to_string(S) + "]");
  }
  const std::size_t stride = patch_stride == 0 ? patch_len : patch_stride;

  const std::size_t B = pred.shape()[0];
  const std::size_t V = pred.shape()[2];
  Tensor ones = Tensor::full({B, V}, 1.0);
  Tensor corr_sum, mean_sum, var_sum;
  std::size_t n_patches = 0;

  for (std::size_t k = 0; k + patch_len <= S; k += stride, ++n_patches) {
    Tensor pp = slice_time(pred, k, patch_len);
    Tensor tp = slice_time(target, k, patch_len);
    Tensor mp = reduce_mean(pp, 1);  // [B×V]
    Tensor mt = reduce_mean(tp, 1);
    Tensor vp = reduce_var(pp, 1);
    Tensor vt = reduce_var(tp, 1);

    Tensor dm = sub(mp, mt);
    Tensor dv = sub(vp, vt);

    Tensor pc = sub(pp, reshape(mp, {B, 1, V}));
    Tensor tc = sub(tp, reshape(mt, {B, 1, V}));
    Tensor cov = reduce_mean(mul(pc, tc), 1);
    Tensor den = sqrt(add(mul(vp, vt), Tensor::scalar(kDenomFloor)));
    Tensor rho = div(cov, den);

    Tensor live = Tensor::zeros({B, V});
    for (std::size_t i = 0; i < live.size(); ++i) {
      const bool constant =
          vp.data()[i] <= kConstVarThreshold || vt.data()[i] <= kConstVarThreshold;
      live.data()[i] = constant ? 0.0 : 1.0;
    }
    Tensor corr = mul(sub(ones, rho), live);
    Tensor mean_term = mul(dm, dm);
    Tensor var_term = mul(dv, dv);

    if (n_patches == 0) {
      corr_sum = corr;
      mean_sum = mean_term;
      var_sum = var_term;
    } else {
      corr_sum = add(corr_sum, corr);
      mean_sum = add(mean_sum, mean_term);
      var_sum = add(var_sum, var_term);
    }
  }

  const double inv = 1.0 / static_cast<double>(n_patches);
  Tensor corr_avg = scale(reduce_mean(corr_sum), inv);
  Tensor mean_avg = scale(reduce_mean(mean_sum), inv);
  Tensor var_avg = scale(reduce_mean(var_sum), inv);
  return add(add(corr_avg, mean_avg), var_avg);
}

LossReport petsa_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg,
                      LossMode mode) {
  require_bsv(pred, "petsa_loss");
  require_bsv(target, "petsa_loss");
  const std::size_t H = pred.shape()[1];
  const std::size_t p = target.shape()[1];
  if (pred.shape()[0] != target.shape()[0] || pred.shape()[2] != target.shape()[2]) {
    throw DimensionError("petsa_loss: pred and target disagree on batch or variables");
  }
  if (p == 0) throw DimensionError("petsa_loss: no observed steps to supervise on");
  if (p > H) {
    throw DimensionError("petsa_loss: observed " + std::to_string(p) + " steps but horizon is " +
                         std::to_string(H));
  }
  if (mode == LossMode::total && p != H) {
    throw DimensionError("petsa_loss: total mode needs the full horizon, got " +
                         std::to_string(p) + " of " + std::to_string(H));
  }
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("petsa_loss: delta must be > 0");
  if (!(cfg.beta >= 0.0)) throw std::invalid_argument("petsa_loss: beta must be >= 0");
  if (cfg.patch_len < 1 || cfg.patch_len > H) {
    throw std::invalid_argument("petsa_loss: patch_len must lie in [1, horizon]");
  }

  Tensor pred_used = p < H ? slice_time(pred, 0, p) : pred;

  LossReport rep;
  rep.n_observed = p;

  Tensor total = huber_loss(pred_used, target, cfg.delta);
  rep.huber = total.value();

  if (p < cfg.patch_len) {
    rep.patch_skipped = true;
  } else {
    Tensor patch = patch_loss(pred_used, target, cfg.patch_len, cfg.patch_stride);
    rep.patch = patch.value();
    total = add(total, patch);
  }

  if (cfg.beta != 0.0) {
    Tensor freq = frequency_loss(pred_used, target);
    rep.freq = freq.value();
    total = add(total, scale(freq, cfg.beta));
  }

  rep.total = total;
  return rep;
}

}  // namespace petsa
