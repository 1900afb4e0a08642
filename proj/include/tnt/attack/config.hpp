#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/data/dataset.hpp"
#include "tnt/patch/image.hpp"
#include "tnt/patch/ops.hpp"

namespace tnt::attack {

enum class AttackMode { targeted, untargeted };

inline const char* to_string(AttackMode m) {
  return m == AttackMode::targeted ? "targeted" : "untargeted";
}

struct AttackConfig {
  AttackMode mode = AttackMode::targeted;
  std::size_t y_target = 0;      // used in targeted mode
  double lambda_balance = 1.0;   // weight of the source-class term in the loss
  double epsilon = 0.01;         // latent step size
  std::size_t n_iter = 20;       // inner iterations per restart
  std::size_t batch_size = 32;   // m
  double tau_batch = 0.9;        // batch fool-fraction gate
  double tau_val = 0.9;          // validation ASR gate
  img::Placement placement{img::Location::lower_right, 0.2, 0, 0};
  std::size_t max_restarts = 50;
  std::uint64_t seed = 1;
  // 1 (default) updates z every inner iteration; n_iter reproduces the
  // single-update-per-scan reading of the search loop.
  std::size_t update_every = 1;
  std::size_t resample_limit = 16;  // latent resamples after empty masks
  img::ThresholdConfig threshold;
  int workers = 1;
  std::string trace_path;  // optional JSONL trace
  // validation stamping location defaults to the search placement;
  // set to override (the location sweep happens post hoc).
  std::optional<img::Placement> validation_placement;

  void validate() const {
    if (epsilon <= 0) throw ConfigError("attack: epsilon must be > 0");
    if (n_iter < 1) throw ConfigError("attack: n_iter must be >= 1");
    if (batch_size < 1) throw ConfigError("attack: batch_size must be >= 1");
    if (!(tau_batch > 0 && tau_batch <= 1) || !(tau_val > 0 && tau_val <= 1))
      throw ConfigError("attack: tau thresholds must be in (0,1]");
    if (update_every < 1 || update_every > n_iter)
      throw ConfigError("attack: update_every must be in [1, n_iter]");
    placement.validate();
  }
};

struct SampledBatch {
  Tensor<double> images;             // (m, 3, S, S) in [0,1]
  std::vector<std::size_t> labels;   // ground-truth source labels
};

/// Draws labeled batches from a fixed index pool. The pool is the attacker's
/// working split (e.g. 100 images); sampling is with replacement and fully
/// driven by the caller's RNG.
class ImageSampler {
public:
  ImageSampler(const data::LabeledDataset& ds, std::vector<std::size_t> pool)
      : ds_(&ds), pool_(std::move(pool)) {
    if (pool_.empty()) throw ConfigError("ImageSampler: empty pool");
  }

  SampledBatch sample(Rng& rng, std::size_t m) const {
    std::vector<std::size_t> idx(m);
    for (auto& i : idx)
      i = pool_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool_.size()) - 1))];
    SampledBatch b{ds_->store.batch(idx), {}};
    b.labels.resize(m);
    for (std::size_t i = 0; i < m; ++i) b.labels[i] = ds_->labels[idx[i]];
    return b;
  }

  const data::LabeledDataset& dataset() const { return *ds_; }
  const std::vector<std::size_t>& pool() const { return pool_; }

private:
  const data::LabeledDataset* ds_;
  std::vector<std::size_t> pool_;
};

}  // namespace tnt::attack
