#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tnt/clf/arch.hpp"
#include "tnt/clf/dataset.hpp"
#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/nn/adam.hpp"
#include "tnt/nn/loss.hpp"
#include "tnt/nn/serialize.hpp"

namespace tnt::clf {

/// Per-channel pixel normalization applied inside the adapter. Stamping and
/// every other patch operation happen in raw [0,1] space; only the classifier
/// sees normalized values.
struct Normalization {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.5, 0.5, 0.5};
};

inline Normalization cifar10_normalization() {
  return {{0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}};
}

struct AttackLossSpec {
  bool targeted = true;
  std::vector<std::size_t> y_target;  // per-sample, required when targeted
  std::vector<std::size_t> y_source;  // per-sample ground truth
  double lambda = 1.0;
};

/// Uniform adapter around a trained network: class probabilities, argmax, and
/// input gradients in raw pixel space. Forward passes reuse internal layer
/// scratch, so clone() per thread for concurrent use.
struct ClassifierHandle {
  nn::Sequential<double> net;
  ArchSpec arch;
  Normalization norm;
  std::vector<std::string> label_names;
  double clean_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string version = "clf-v1";

  std::size_t num_classes() const { return arch.num_classes; }
  std::size_t input_size() const { return arch.input_size; }

  void check_batch(const Tensor<double>& batch01) const {
    if (batch01.rank() != 4 || batch01.dim(1) != 3 || batch01.dim(2) != arch.input_size ||
        batch01.dim(3) != arch.input_size)
      throw ShapeError("classifier: expected (B,3," + std::to_string(arch.input_size) + "," +
                       std::to_string(arch.input_size) + ") pixels; resizing is the caller's choice");
  }

  Tensor<double> normalize(const Tensor<double>& batch01) const {
    Tensor<double> x = batch01;
    const std::size_t plane = arch.input_size * arch.input_size;
    for (std::size_t i = 0; i < x.dim(0); ++i)
      for (std::size_t c = 0; c < 3; ++c) {
        double* p = x.data() + (i * 3 + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) p[j] = (p[j] - norm.mean[c]) / norm.std[c];
      }
    return x;
  }

  Tensor<double> logits(const Tensor<double>& batch01, bool training = false) {
    check_batch(batch01);
    return net.forward(normalize(batch01), training);
  }

  Tensor<double> probabilities(const Tensor<double>& batch01) {
    return nn::softmax_rows(logits(batch01));
  }

  std::vector<std::size_t> argmax(const Tensor<double>& batch01) {
    return nn::argmax_rows(logits(batch01));
  }

  /// Backpropagates a logits-space gradient to raw pixels (chain rule through
  /// the normalization).
  Tensor<double> input_grad_from_logits_grad(const Tensor<double>& grad_logits) {
    Tensor<double> gx = net.backward(grad_logits);
    const std::size_t plane = arch.input_size * arch.input_size;
    for (std::size_t i = 0; i < gx.dim(0); ++i)
      for (std::size_t c = 0; c < 3; ++c) {
        double* p = gx.data() + (i * 3 + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) p[j] /= norm.std[c];
      }
    return gx;
  }

  /// Loss value and d(loss)/d(pixels) for the attack objective.
  std::pair<double, Tensor<double>> loss_and_input_grad(const Tensor<double>& batch01,
                                                        const AttackLossSpec& spec) {
    if (spec.targeted && spec.y_target.empty())
      throw ConfigError("loss_and_input_grad: targeted mode requires y_target");
    Tensor<double> lg = logits(batch01, false);
    auto res = nn::attack_loss_with_logits(lg, spec.targeted, spec.y_target, spec.y_source, spec.lambda);
    return {res.loss, input_grad_from_logits_grad(res.grad_logits)};
  }

  /// Mean cross-entropy input gradient (used by gradient-check suites).
  std::pair<double, Tensor<double>> ce_and_input_grad(const Tensor<double>& batch01,
                                                      const std::vector<std::size_t>& labels) {
    Tensor<double> lg = logits(batch01, false);
    auto res = nn::cross_entropy_with_logits(lg, labels);
    return {res.loss, input_grad_from_logits_grad(res.grad_logits)};
  }

  ClassifierHandle clone() const;
};

// --- checkpointing ----------------------------------------------------------

inline nn::Checkpoint classifier_checkpoint(ClassifierHandle& clf) {
  nn::Checkpoint ckpt;
  ckpt.meta = nn::Json{{"format_version", 1},
                       {"kind", "classifier"},
                       {"version", clf.version},
                       {"arch", arch_to_json(clf.arch)},
                       {"normalization",
                        nn::Json{{"mean", clf.norm.mean}, {"std", clf.norm.std}}},
                       {"label_names", clf.label_names},
                       {"clean_accuracy", clf.clean_accuracy},
                       {"seed", clf.seed}};
  for (auto& [name, t] : nn::snapshot_state(clf.net)) ckpt.tensors.emplace_back(name, t);
  return ckpt;
}

inline ClassifierHandle classifier_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "classifier")
    throw IoError("checkpoint kind mismatch: expected classifier");
  ClassifierHandle clf;
  clf.arch = arch_from_json(ckpt.meta.at("arch"));
  clf.seed = ckpt.meta.at("seed").get<std::uint64_t>();
  clf.net = build_arch(clf.arch, clf.seed);
  const auto& n = ckpt.meta.at("normalization");
  clf.norm.mean = n.at("mean").get<std::array<double, 3>>();
  clf.norm.std = n.at("std").get<std::array<double, 3>>();
  clf.label_names = ckpt.meta.at("label_names").get<std::vector<std::string>>();
  clf.clean_accuracy = ckpt.meta.at("clean_accuracy").is_null()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : ckpt.meta.at("clean_accuracy").get<double>();
  nn::restore_state(clf.net, ckpt.tensors);
  return clf;
}

inline ClassifierHandle ClassifierHandle::clone() const {
  auto& self = const_cast<ClassifierHandle&>(*this);
  ClassifierHandle out;
  out.arch = arch;
  out.norm = norm;
  out.label_names = label_names;
  out.clean_accuracy = clean_accuracy;
  out.seed = seed;
  out.version = version;
  out.net = build_arch(arch, seed);
  nn::restore_state(out.net, nn::snapshot_state(self.net));
  return out;
}

// --- training ---------------------------------------------------------------

struct ClassifierTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  Normalization norm;
};

inline double accuracy(ClassifierHandle& clf, const data::LabeledDataset& ds,
                       const std::vector<std::size_t>& indices, std::size_t batch_size = 64) {
  std::size_t correct = 0;
  for (std::size_t off = 0; off < indices.size(); off += batch_size) {
    const std::size_t take = std::min(batch_size, indices.size() - off);
    std::vector<std::size_t> idx(indices.begin() + off, indices.begin() + off + take);
    const auto pred = clf.argmax(ds.store.batch(idx));
    for (std::size_t i = 0; i < take; ++i)
      if (pred[i] == ds.labels[idx[i]]) ++correct;
  }
  return indices.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(indices.size());
}

/// Minibatch cross-entropy training. Single-worker and fully seeded: a fixed
/// (seed, dataset) pair reproduces identical final weights. Clean test
/// accuracy is recorded in the handle when a test set is supplied.
inline ClassifierHandle train_classifier(const ArchSpec& arch, const data::LabeledDataset& train,
                                         const ClassifierTrainConfig& cfg,
                                         const data::LabeledDataset* test = nullptr) {
  train.validate();
  if (train.num_classes() > arch.num_classes)
    throw DatasetSchemaError("train_classifier: dataset has more classes than the architecture");
  for (auto l : train.labels)
    if (l >= arch.num_classes) throw DatasetSchemaError("train_classifier: label out of range");
  if (train.store.image_size != arch.input_size)
    throw ShapeError("train_classifier: dataset image size != arch input size");

  ClassifierHandle clf;
  clf.arch = arch;
  clf.norm = cfg.norm;
  clf.label_names = train.class_names;
  clf.seed = cfg.seed;
  clf.net = build_arch(arch, cfg.seed);

  nn::Adam<double> opt(cfg.lr, cfg.beta1, cfg.beta2);
  auto params = clf.net.parameters();
  Rng rng(cfg.seed + 1);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const std::size_t take = std::min(cfg.batch_size, order.size() - off);
      std::vector<std::size_t> idx(order.begin() + off, order.begin() + off + take);
      std::vector<std::size_t> labels(take);
      for (std::size_t i = 0; i < take; ++i) labels[i] = train.labels[idx[i]];
      Tensor<double> batch = train.store.batch(idx);
      clf.net.zero_grad();
      Tensor<double> lg = clf.logits(batch, true);
      auto res = nn::cross_entropy_with_logits(lg, labels);
      clf.net.backward(res.grad_logits);
      opt.step(params);
    }
  }

  if (test) clf.clean_accuracy = accuracy(clf, *test, data::all_indices(test->size()));
  return clf;
}

}  // namespace tnt::clf
