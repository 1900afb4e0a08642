#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/core/tensor.hpp"

namespace tnt::nn {

/// Row-wise softmax with the usual max-shift for stability.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected (N,K)");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> probs(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    T mx = logits.at2(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at2(i, j));
    T denom = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      const T e = std::exp(logits.at2(i, j) - mx);
      probs.at2(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < k; ++j) probs.at2(i, j) /= denom;
  }
  return probs;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& scores) {
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (scores.at2(i, j) > scores.at2(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

template <typename T>
struct LossGrad {
  T loss;
  Tensor<T> grad_logits;
};

/// Mean cross-entropy over the batch, evaluated from logits in log-space.
template <typename T>
LossGrad<T> cross_entropy_with_logits(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ShapeError("cross_entropy: label count mismatch");
  Tensor<T> probs = softmax_rows(logits);
  T loss = T(0);
  Tensor<T> grad(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels[i];
    if (y >= k) throw ShapeError("cross_entropy: label out of range");
    loss -= std::log(std::max(probs.at2(i, y), T(1e-300)));
    for (std::size_t j = 0; j < k; ++j)
      grad.at2(i, j) = (probs.at2(i, j) - (j == y ? T(1) : T(0))) / static_cast<T>(n);
  }
  return {loss / static_cast<T>(n), std::move(grad)};
}

/// The search objective at the logits level. Targeted:
///   L = CE(y_target) - lambda * CE(y_source);
/// untargeted: L = -CE(y_source), i.e. pushing the source class down.
template <typename T>
LossGrad<T> attack_loss_with_logits(const Tensor<T>& logits, bool targeted,
                                    const std::vector<std::size_t>& y_target,
                                    const std::vector<std::size_t>& y_source, T lambda) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (y_source.size() != n) throw ShapeError("attack_loss: source label count mismatch");
  if (targeted && y_target.size() != n) throw ShapeError("attack_loss: target label count mismatch");
  Tensor<T> probs = softmax_rows(logits);
  T loss = T(0);
  Tensor<T> grad(logits.shape());
  const T invn = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = y_source[i];
    if (s >= k) throw ShapeError("attack_loss: source label out of range");
    const T ce_s = -std::log(std::max(probs.at2(i, s), T(1e-300)));
    if (targeted) {
      const std::size_t t = y_target[i];
      if (t >= k) throw ShapeError("attack_loss: target label out of range");
      const T ce_t = -std::log(std::max(probs.at2(i, t), T(1e-300)));
      loss += (ce_t - lambda * ce_s) * invn;
      for (std::size_t j = 0; j < k; ++j) {
        const T p = probs.at2(i, j);
        const T dt = p - (j == t ? T(1) : T(0));
        const T ds = p - (j == s ? T(1) : T(0));
        grad.at2(i, j) = (dt - lambda * ds) * invn;
      }
    } else {
      loss += -ce_s * invn;
      for (std::size_t j = 0; j < k; ++j) {
        const T p = probs.at2(i, j);
        grad.at2(i, j) = -(p - (j == s ? T(1) : T(0))) * invn;
      }
    }
  }
  return {loss, std::move(grad)};
}

}  // namespace tnt::nn
