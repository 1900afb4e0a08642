#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "tnt/attack/config.hpp"
#include "tnt/attack/search.hpp"
#include "tnt/clf/classifier.hpp"
#include "tnt/common/error.hpp"
#include "tnt/gan/models.hpp"
#include "tnt/nn/adam.hpp"

namespace tnt::advgen {

struct FinetuneConfig {
  attack::AttackMode mode = attack::AttackMode::targeted;
  std::size_t y_target = 0;
  double lambda_balance = 1.0;
  std::size_t batch_size = 32;
  double tau_batch = 0.9;
  double tau_val = 0.9;
  img::Placement placement{img::Location::lower_right, 0.05, 0, 0};
  double alpha_opt = 1e-4;  // optimizer step size
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t max_steps = 500;
  std::uint64_t seed = 1;
  img::ThresholdConfig threshold;
  std::size_t resample_limit = 16;
  std::size_t snapshot_every = 25;      // divergence-recovery cadence
  std::size_t val_report_samples = 8;   // per-z validation ASRs recorded at the end

  void validate() const {
    if (alpha_opt <= 0) throw ConfigError("finetune: alpha_opt must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw ConfigError("finetune: beta coefficients must be in [0,1)");
    if (batch_size < 1) throw ConfigError("finetune: batch_size must be >= 1");
    placement.validate();
  }
};

struct FinetuneResult {
  gan::GeneratorHandle generator;
  std::optional<double> best_val_asr;
  bool converged = false;
  std::size_t steps_used = 0;
  std::size_t lr_halvings = 0;
  std::vector<double> per_z_val_asr;  // distribution over fresh latents, recorded not gated
};

/// A single patch from the (fine-tuned) generator for a fixed latent.
inline img::Patch emit_patch(gan::GeneratorHandle& gen, const Tensor<double>& z,
                             const img::ThresholdConfig& thr = {}) {
  auto samples = gan::sample_patches(gen, z, thr);
  if (!samples[0].ok) throw EmptyPatch(samples[0].error);
  return samples[0].patch;
}

/// Generator-parameter fine-tuning against a frozen classifier: per step a
/// fresh z produces a patch, the patch is stamped over an image batch, the
/// combined loss is backpropagated all the way into θ, and an
/// adaptive-moment step updates the generator. A batch fool fraction above
/// tau_batch triggers validation of a fresh-z patch; reaching tau_val stops.
///
/// The classifier is never written to. Normalization layers run on their
/// frozen running statistics (each step generates a single patch, so batch
/// statistics are unavailable); their affine parameters still train.
///
/// Non-finite losses roll the generator back to the last snapshot and halve
/// the step size; the fourth halving raises FinetuneDiverged.
inline FinetuneResult finetune_generator(const gan::GeneratorHandle& warm_start,
                                         clf::ClassifierHandle& clf,
                                         const attack::ImageSampler& sampler,
                                         const data::LabeledDataset& val_set,
                                         const std::vector<std::size_t>& val_indices,
                                         const FinetuneConfig& cfg) {
  cfg.validate();
  FinetuneResult result;
  result.generator = gan::generator_from_checkpoint(
      gan::generator_checkpoint(const_cast<gan::GeneratorHandle&>(warm_start)));
  auto& gen = result.generator;
  gen.finetuned = true;

  attack::AttackConfig chain_cfg;
  chain_cfg.mode = cfg.mode;
  chain_cfg.y_target = cfg.y_target;
  chain_cfg.lambda_balance = cfg.lambda_balance;
  chain_cfg.placement = cfg.placement;
  chain_cfg.threshold = cfg.threshold;
  chain_cfg.batch_size = cfg.batch_size;

  nn::Adam<double> opt(cfg.alpha_opt, cfg.beta1, cfg.beta2);
  auto params = gen.net.parameters();
  Rng rng(cfg.seed);

  auto snapshot = nn::snapshot_state(gen.net);
  std::size_t halvings = 0;

  auto validate_fresh_z = [&](Rng& r) {
    for (std::size_t tries = 0; tries <= cfg.resample_limit; ++tries) {
      Tensor<double> z = gan::sample_latent(r, 1, gen.latent_dim);
      try {
        const img::Patch p = emit_patch(gen, z, cfg.threshold);
        return attack::validate_candidate(p, clf, val_set, val_indices, cfg.placement, cfg.mode,
                                          cfg.y_target);
      } catch (const EmptyPatch&) {
      }
    }
    return 0.0;
  };

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    result.steps_used = step + 1;
    attack::SampledBatch batch = sampler.sample(rng, cfg.batch_size);

    attack::ZEvaluation ev;
    bool usable = false;
    for (std::size_t tries = 0; tries <= cfg.resample_limit && !usable; ++tries) {
      Tensor<double> z = gan::sample_latent(rng, 1, gen.latent_dim);
      try {
        ev = attack::evaluate_z(gen, clf, z, batch, chain_cfg, true);
        usable = true;
      } catch (const EmptyPatch&) {
      }
    }
    if (!usable) continue;  // step skipped, no usable patch from this region

    if (!ev.finite) {
      nn::restore_state(gen.net, snapshot);
      params = gen.net.parameters();
      if (++halvings > 3)
        throw FinetuneDiverged("finetune_generator: loss stayed non-finite after 3 halvings");
      opt.set_lr(opt.lr() / 2.0);
      result.lr_halvings = halvings;
      continue;
    }

    // evaluate_z already ran the generator backward for dL/dz; the same pass
    // populated dL/dθ, so the optimizer can step directly.
    opt.step(params);

    if (cfg.snapshot_every && (step + 1) % cfg.snapshot_every == 0)
      snapshot = nn::snapshot_state(gen.net);

    if (ev.fool_fraction > cfg.tau_batch) {
      const double asr = validate_fresh_z(rng);
      if (!result.best_val_asr || asr > *result.best_val_asr) result.best_val_asr = asr;
      if (asr >= cfg.tau_val) {
        result.converged = true;
        break;
      }
    }
  }

  Rng report_rng(cfg.seed + 1);
  for (std::size_t i = 0; i < cfg.val_report_samples; ++i)
    result.per_z_val_asr.push_back(validate_fresh_z(report_rng));

  return result;
}

}  // namespace tnt::advgen
