#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "petsa/errors.hpp"
#include "petsa/tensor.hpp"

namespace petsa {

namespace detail {
inline void require_finite(const std::vector<double>& g) {
  for (double gi : g) {
    if (!std::isfinite(gi)) throw NumericalError("optimizer: non-finite gradient");
  }
}
}  // namespace detail

/// Plain gradient descent over a fixed parameter group. Tensors whose
/// gradient is not materialized (never touched by the last backward) are
/// skipped.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {}

  void step() {
    for (Tensor& p : params_) {
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      detail::require_finite(g);
      double* w = p.data();
      for (std::size_t i = 0; i < p.size(); ++i) w[i] -= lr_ * g[i];
    }
  }

  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  double lr_;
};

/// Adam with bias correction (Kingma & Ba defaults).
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].size(), 0.0);
      v_[i].assign(params_[i].size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      detail::require_finite(g);
      double* w = p.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        const double mhat = m_[i][j] / bc1;
        const double vhat = v_[i][j] / bc2;
        w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace petsa
