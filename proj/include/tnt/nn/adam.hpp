#pragma once

#include <cmath>
#include <vector>

#include "tnt/core/tensor.hpp"
#include "tnt/nn/layers.hpp"

namespace tnt::nn {

/// Adaptive-moment optimizer with bias correction. State is keyed by position
/// in the parameter list, which is stable for a fixed network.
template <typename T>
class Adam {
public:
  Adam(T lr, T beta1, T beta2, T eps = T(1e-8)) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamRef<T>>& params) {
    if (m_.empty()) {
      m_.reserve(params.size());
      v_.reserve(params.size());
      for (auto& p : params) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
      }
    }
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& w = *params[i].value;
      const Tensor<T>& g = *params[i].grad;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (std::size_t j = 0; j < w.numel(); ++j) {
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }
  std::uint64_t steps() const { return t_; }

private:
  T lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace tnt::nn
