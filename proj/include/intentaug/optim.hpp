#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "intentaug/tensor.hpp"

namespace intentaug {

// Linear warmup to the base rate, then linear decay to zero.
struct LinearSchedule {
  double base_rate = 1e-3;
  long total_steps = 1;
  long warmup_steps = 0;

  double rate(long step) const {
    if (step < warmup_steps) return base_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    const double remaining = static_cast<double>(total_steps - step);
    const double span = static_cast<double>(std::max(1L, total_steps - warmup_steps));
    return base_rate * std::max(0.0, remaining / span);
  }
};

// Adam with decoupled weight decay. Moment buffers follow the parameter
// visitation order of the model, which must stay fixed between steps.
template <typename Scalar>
class AdamW {
 public:
  AdamW(double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Scales gradients so their global L2 norm is at most `max_norm`; returns
  // the norm before clipping.
  template <typename Model>
  static double clip_grad_norm(Model& model, double max_norm) {
    double sq = 0;
    model.visit([&](const std::string&, Parameter<Scalar>& p) { sq += static_cast<double>(p.grad.squaredNorm()); });
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
      const auto scale = static_cast<Scalar>(max_norm / (norm + 1e-6));
      model.visit([&](const std::string&, Parameter<Scalar>& p) { p.grad *= scale; });
    }
    return norm;
  }

  template <typename Model>
  void step(Model& model, double rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    const auto step_size = static_cast<Scalar>(rate / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(eps_);
    const auto decay = static_cast<Scalar>(rate * weight_decay_);
    std::size_t index = 0;
    model.visit([&](const std::string&, Parameter<Scalar>& p) {
      if (index == m_.size()) {
        m_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      }
      auto& m = m_[index];
      auto& v = v_[index];
      ++index;
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      if (p.decay && decay > 0) p.value *= Scalar(1) - decay;
      p.value.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
    });
  }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

}  // namespace intentaug
