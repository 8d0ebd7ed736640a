#pragma once

#include <cmath>
#include <vector>

#include "ptkit/tensor.hpp"

namespace ptkit {

/// Scales every gradient in the list so their combined L2 norm is at most
/// max_norm. Returns the pre-clip norm. max_norm <= 0 disables clipping.
inline double clip_global_norm(const ParamList& params, double max_norm) {
  double sum_sq = 0.0;
  for (const Param* p : params) sum_sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sum_sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Param* p : const_cast<ParamList&>(params)) p->grad *= scale;
  }
  return norm;
}

// AdamW with decoupled weight decay. The parameter list order is fixed at
// construction; state is keyed by position, so the same list must be passed
// implicitly through the lifetime of the optimizer.
class AdamW {
 public:
  AdamW(ParamList params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : params_(std::move(params)),
        weight_decay_(weight_decay),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param* p : params_) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  /// One update from the currently accumulated gradients.
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Param& p = *params_[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      if (weight_decay_ != 0.0) p.value -= lr * weight_decay_ * p.value;
      const Mat m_hat = m_[i] / bc1;
      const Mat v_hat = v_[i] / bc2;
      p.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  ParamList params_;
  double weight_decay_;
  double beta1_;
  double beta2_;
  double eps_;
  int64_t t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

}  // namespace ptkit
