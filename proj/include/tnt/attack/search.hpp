#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tnt/attack/config.hpp"
#include "tnt/clf/classifier.hpp"
#include "tnt/common/error.hpp"
#include "tnt/gan/models.hpp"
#include "tnt/nn/loss.hpp"
#include "tnt/patch/io.hpp"
#include "tnt/patch/ops.hpp"

namespace tnt::attack {

/// Combined search objective evaluated from class probabilities:
/// targeted    L = CE(y_target) - lambda * CE(y_source)
/// untargeted  L = -CE(y_source)
inline double combined_loss(const Tensor<double>& prob_batch, AttackMode mode,
                            const std::optional<std::vector<std::size_t>>& y_target,
                            const std::vector<std::size_t>& y_source, double lambda_balance) {
  const std::size_t n = prob_batch.dim(0), k = prob_batch.dim(1);
  if (y_source.size() != n) throw ShapeError("combined_loss: source label count mismatch");
  if (mode == AttackMode::targeted && (!y_target || y_target->size() != n))
    throw ConfigError("combined_loss: targeted mode requires per-sample y_target");
  double ce_t = 0.0, ce_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y_source[i] >= k) throw ShapeError("combined_loss: label out of range");
    ce_s -= std::log(std::max(prob_batch.at2(i, y_source[i]), 1e-300));
    if (mode == AttackMode::targeted)
      ce_t -= std::log(std::max(prob_batch.at2(i, (*y_target)[i]), 1e-300));
  }
  ce_t /= static_cast<double>(n);
  ce_s /= static_cast<double>(n);
  return mode == AttackMode::targeted ? ce_t - lambda_balance * ce_s : -ce_s;
}

/// z' = z - eps * sign(grad), coordinate-wise; sign(0) = 0.
inline Tensor<double> latent_step(const Tensor<double>& z, const Tensor<double>& grad_z,
                                  double epsilon) {
  if (!z.same_shape(grad_z)) throw ShapeError("latent_step: grad dimension mismatch");
  Tensor<double> out = z;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double g = grad_z[i];
    if (g > 0) out[i] -= epsilon;
    else if (g < 0) out[i] += epsilon;
  }
  return out;
}

struct ZEvaluation {
  double loss = 0.0;
  std::size_t fools = 0;
  double fool_fraction = 0.0;
  Tensor<double> grad_z;  // (1, latent_dim); empty when need_grad = false
  img::Patch patch;       // background removed, generator resolution
  bool finite = true;
};

/// One pass of the search chain: z -> patch -> mask -> background removal ->
/// placement -> stamping over the batch -> classifier -> combined loss, and
/// the reverse pass back to z. The mask is treated as a constant in the
/// backward direction (thresholding has zero gradient); pass frozen_mask to
/// pin it externally, e.g. for finite-difference checks.
inline ZEvaluation evaluate_z(gan::GeneratorHandle& gen, clf::ClassifierHandle& clf,
                              const Tensor<double>& z, const SampledBatch& batch,
                              const AttackConfig& cfg, bool need_grad,
                              const img::BinaryMask* frozen_mask = nullptr) {
  const std::size_t m = batch.images.dim(0);
  const std::size_t canvas = clf.input_size();
  ZEvaluation ev;

  Tensor<double> delta_batch = gen.forward(z, false);
  img::Patch patch;
  patch.delta = img::batch_to_image(delta_batch, 0);
  patch.source = gen.finetuned ? img::PatchSource::finetuned_sample : img::PatchSource::generator_sample;
  patch.mask = frozen_mask ? *frozen_mask : img::compute_mask(patch.delta, cfg.threshold);
  patch = img::remove_background(patch);
  ev.patch = patch;

  const img::Placed placed = img::place(patch, cfg.placement, canvas, canvas);

  Tensor<double> stamped({m, 3, canvas, canvas});
  for (std::size_t i = 0; i < m; ++i) {
    const img::Image xi = img::batch_to_image(batch.images, i);
    img::image_into_batch(img::stamp(xi, placed.delta, placed.mask), stamped, i);
  }

  Tensor<double> logits = clf.logits(stamped, false);
  const auto preds = nn::argmax_rows(logits);
  for (std::size_t i = 0; i < m; ++i) {
    const bool fooled = cfg.mode == AttackMode::targeted ? preds[i] == cfg.y_target
                                                         : preds[i] != batch.labels[i];
    ev.fools += fooled;
  }
  ev.fool_fraction = static_cast<double>(ev.fools) / static_cast<double>(m);

  std::vector<std::size_t> y_target;
  if (cfg.mode == AttackMode::targeted) y_target.assign(m, cfg.y_target);
  auto loss_res = nn::attack_loss_with_logits(logits, cfg.mode == AttackMode::targeted, y_target,
                                              batch.labels, cfg.lambda_balance);
  ev.loss = loss_res.loss;
  ev.finite = std::isfinite(ev.loss);
  if (!need_grad || !ev.finite) return ev;

  Tensor<double> grad_x = clf.input_grad_from_logits_grad(loss_res.grad_logits);
  img::Image grad_canvas(canvas, canvas, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const img::Image gi = img::batch_to_image(grad_x, i);
    img::stamp_backward_to_delta(gi, placed.mask, grad_canvas);
  }
  img::Image grad_patch = img::place_backward_to_patch(grad_canvas, placed.geometry,
                                                       patch.delta.height, patch.delta.width);
  img::apply_mask_to_grad(grad_patch, patch.mask);

  Tensor<double> grad_delta = img::image_to_tensor(grad_patch);
  gen.net.zero_grad();
  ev.grad_z = gen.backward(grad_delta);
  ev.finite = ev.grad_z.all_finite();
  return ev;
}

/// Plain ASR of a finalized patch over an index list: fooled / total.
/// Counts argmax == y_target (targeted) or argmax != ground truth
/// (untargeted); deterministic for fixed inputs.
inline double validate_candidate(const img::Patch& patch, clf::ClassifierHandle& clf,
                                 const data::LabeledDataset& val,
                                 const std::vector<std::size_t>& indices,
                                 const img::Placement& placement, AttackMode mode,
                                 std::size_t y_target = 0, std::size_t eval_batch = 64) {
  if (indices.empty()) throw ConfigError("validate_candidate: empty validation set");
  const std::size_t canvas = clf.input_size();
  const img::Placed placed = img::place(patch, placement, canvas, canvas);
  std::size_t fooled = 0;
  for (std::size_t off = 0; off < indices.size(); off += eval_batch) {
    const std::size_t take = std::min(eval_batch, indices.size() - off);
    std::vector<std::size_t> idx(indices.begin() + off, indices.begin() + off + take);
    Tensor<double> batch = val.store.batch(idx);
    Tensor<double> stamped({take, 3, canvas, canvas});
    for (std::size_t i = 0; i < take; ++i) {
      const img::Image xi = img::batch_to_image(batch, i);
      img::image_into_batch(img::stamp(xi, placed.delta, placed.mask), stamped, i);
    }
    const auto preds = clf.argmax(stamped);
    for (std::size_t i = 0; i < take; ++i) {
      fooled += mode == AttackMode::targeted ? preds[i] == y_target
                                             : preds[i] != val.labels[idx[i]];
    }
  }
  return static_cast<double>(fooled) / static_cast<double>(indices.size());
}

struct TraceRecord {
  std::size_t restart = 0;
  std::size_t iter = 0;
  double fool_fraction = 0.0;
  double loss = 0.0;
  double grad_inf_norm = 0.0;
  double best_so_far = 0.0;
};

struct TnTCandidate {
  Tensor<double> z;
  img::Patch patch;
  double batch_asr = 0.0;
  std::optional<double> val_asr;  // present iff the batch gate passed
  std::optional<std::size_t> target_label;
  bool converged = false;
  std::size_t restarts_used = 0;
  std::size_t aborted_restarts = 0;
  std::string generator_version;
  std::string classifier_version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> trace;
};

namespace detail {

struct RestartOutcome {
  bool success = false;
  bool aborted = false;
  TnTCandidate candidate;  // best state seen within this restart
  std::vector<TraceRecord> trace;
};

/// One outer pass: fresh batch, fresh z, n_iter inner iterations with
/// sign-gradient updates. The fool counter restarts with the pass.
template <typename Validator>
RestartOutcome run_restart(gan::GeneratorHandle& gen, clf::ClassifierHandle& clf,
                           const ImageSampler& sampler, const AttackConfig& cfg,
                           std::size_t restart_index, Rng rng, const Validator& validate,
                           double global_best) {
  RestartOutcome out;
  SampledBatch batch = sampler.sample(rng, cfg.batch_size);
  Tensor<double> z({1, 0});
  auto resample_z = [&] { z = gan::sample_latent(rng, 1, gen.latent_dim); };
  resample_z();

  std::size_t resamples = 0;
  std::size_t fools_window = 0, scans_window = 0;
  double best_local = -1.0;

  for (std::size_t j = 1; j <= cfg.n_iter; ++j) {
    const bool update_now = (j % cfg.update_every == 0) || j == cfg.n_iter;
    ZEvaluation ev;
    try {
      ev = evaluate_z(gen, clf, z, batch, cfg, update_now);
    } catch (const EmptyPatch&) {
      if (++resamples > cfg.resample_limit) {
        out.aborted = true;
        return out;
      }
      resample_z();
      --j;
      continue;
    }
    if (!ev.finite) {
      out.aborted = true;
      return out;
    }
    fools_window += ev.fools;
    scans_window += cfg.batch_size;

    const double window_fraction = static_cast<double>(fools_window) / static_cast<double>(scans_window);
    if (window_fraction > best_local) best_local = window_fraction;
    TraceRecord rec{restart_index, j, window_fraction, ev.loss,
                    update_now ? ev.grad_z.inf_norm() : 0.0,
                    std::max(global_best, best_local)};
    out.trace.push_back(rec);

    if (window_fraction >= out.candidate.batch_asr || out.candidate.patch.delta.pixels.empty()) {
      out.candidate.z = z;
      out.candidate.patch = ev.patch;
      out.candidate.batch_asr = window_fraction;
    }

    if (update_now) {
      const Tensor<double> z_before = z;
      z = latent_step(z, ev.grad_z, cfg.epsilon);
      if (window_fraction > cfg.tau_batch) {
        const double asr = validate(ev.patch);
        out.candidate.z = z_before;
        out.candidate.patch = ev.patch;
        out.candidate.batch_asr = window_fraction;
        out.candidate.val_asr = asr;
        if (asr >= cfg.tau_val) {
          out.success = true;
          return out;
        }
      }
      fools_window = 0;
      scans_window = 0;
    }
  }
  return out;
}

}  // namespace detail

/// The latent-space search: outer restarts draw a fresh batch and a fresh
/// z ~ N(0,1); inner iterations regenerate the patch, stamp the batch, and
/// move z against the sign of dL/dz. A batch fool fraction above tau_batch
/// triggers validation on the held-out split; the first candidate reaching
/// tau_val is returned as converged. Otherwise the best-seen candidate comes
/// back flagged not-converged.
///
/// Restarts are independent; with workers > 1 they run in parallel with
/// per-restart derived seeds and the merge picks the successful restart with
/// the lowest index, so results do not depend on the worker count.
inline TnTCandidate search_tnt(gan::GeneratorHandle& gen, clf::ClassifierHandle& clf,
                               const ImageSampler& sampler, const data::LabeledDataset& val_set,
                               const std::vector<std::size_t>& val_indices,
                               const AttackConfig& cfg) {
  cfg.validate();
  if (gen.latent_dim == 0) throw ConfigError("search_tnt: generator has no latent dimension");
  Rng seeder(cfg.seed);

  const img::Placement val_placement = cfg.validation_placement.value_or(cfg.placement);
  auto make_validator = [&](clf::ClassifierHandle& c) {
    clf::ClassifierHandle* cp = &c;
    return [&, cp, vp = val_placement](const img::Patch& p) {
      return validate_candidate(p, *cp, val_set, val_indices, vp, cfg.mode, cfg.y_target);
    };
  };

  TnTCandidate result;
  result.seed = cfg.seed;
  result.generator_version = gen.version;
  result.classifier_version = clf.version;
  if (cfg.mode == AttackMode::targeted) result.target_label = cfg.y_target;

  // seeds are a function of the restart index only
  std::vector<Rng> restart_rngs;
  restart_rngs.reserve(cfg.max_restarts);
  for (std::size_t r = 0; r < cfg.max_restarts; ++r) restart_rngs.push_back(seeder.fork(r));

  if (cfg.max_restarts == 0) {
    // nothing searched: emit the patch of the initial latent draw, flagged
    Rng rng = seeder.fork(0);
    Tensor<double> z = gan::sample_latent(rng, 1, gen.latent_dim);
    for (std::size_t tries = 0;; ++tries) {
      try {
        auto samples = gan::sample_patches(gen, z, cfg.threshold);
        if (samples[0].ok) {
          result.z = z;
          result.patch = samples[0].patch;
          break;
        }
      } catch (const Error&) {
      }
      if (tries >= cfg.resample_limit) throw EmptyPatch("search_tnt: no usable initial patch");
      z = gan::sample_latent(rng, 1, gen.latent_dim);
    }
    return result;
  }

  std::vector<detail::RestartOutcome> outcomes(cfg.max_restarts);
  const int workers = std::max(1, cfg.workers);

  if (workers == 1) {
    double global_best = 0.0;
    auto validator = make_validator(clf);
    for (std::size_t r = 0; r < cfg.max_restarts; ++r) {
      outcomes[r] = detail::run_restart(gen, clf, sampler, cfg, r, restart_rngs[r], validator,
                                        global_best);
      global_best = std::max(global_best, outcomes[r].candidate.batch_asr);
      if (outcomes[r].success) {
        outcomes.resize(r + 1);
        break;
      }
    }
  } else {
    // workers own disjoint restart blocks and private model clones
    const std::size_t per = (cfg.max_restarts + workers - 1) / static_cast<std::size_t>(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        gan::GeneratorHandle gen_w = gan::generator_from_checkpoint(gan::generator_checkpoint(gen));
        clf::ClassifierHandle clf_w = clf.clone();
        auto validator = make_validator(clf_w);
        const std::size_t lo = static_cast<std::size_t>(w) * per;
        const std::size_t hi = std::min(cfg.max_restarts, lo + per);
        for (std::size_t r = lo; r < hi; ++r) {
          outcomes[r] = detail::run_restart(gen_w, clf_w, sampler, cfg, r, restart_rngs[r],
                                            validator, 0.0);
          if (outcomes[r].success) break;  // this worker is done
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // merge: first success by restart index, else best batch fraction
  std::size_t best_r = cfg.max_restarts;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    result.aborted_restarts += outcomes[r].aborted;
    for (const auto& t : outcomes[r].trace) result.trace.push_back(t);
    if (outcomes[r].success) {
      best_r = r;
      break;
    }
  }
  result.restarts_used = outcomes.size();
  if (best_r < cfg.max_restarts) {
    const auto& c = outcomes[best_r].candidate;
    result.z = c.z;
    result.patch = c.patch;
    result.batch_asr = c.batch_asr;
    result.val_asr = c.val_asr;
    result.converged = true;
  } else {
    // best-seen: highest batch fool fraction, earliest restart on ties
    double best = -1.0;
    for (const auto& o : outcomes) {
      if (o.candidate.patch.delta.pixels.empty()) continue;
      if (o.candidate.batch_asr > best) {
        best = o.candidate.batch_asr;
        result.z = o.candidate.z;
        result.patch = o.candidate.patch;
        result.batch_asr = o.candidate.batch_asr;
        result.val_asr = o.candidate.val_asr;
      }
    }
    result.converged = false;
  }

  // keep best-so-far monotone across the merged trace
  double run_best = 0.0;
  for (auto& t : result.trace) {
    run_best = std::max(run_best, t.fool_fraction);
    t.best_so_far = run_best;
  }

  if (!cfg.trace_path.empty()) {
    std::ofstream f(cfg.trace_path);
    for (const auto& t : result.trace) {
      nlohmann::ordered_json line{{"restart", t.restart},
                                  {"iter", t.iter},
                                  {"fool_fraction", t.fool_fraction},
                                  {"loss", t.loss},
                                  {"grad_inf_norm", t.grad_inf_norm},
                                  {"best_so_far", t.best_so_far}};
      f << line.dump() << "\n";
    }
  }
  return result;
}

/// Candidate bundle on disk: the RGBA patch raster plus a metadata document
/// (latent vector, ASRs, provenance, config hash, seed).
inline void write_candidate_bundle(const std::string& dir, const TnTCandidate& c) {
  std::filesystem::create_directories(dir);
  img::save_patch((std::filesystem::path(dir) / "patch.png").string(), c.patch);
  nlohmann::ordered_json meta{
      {"format_version", 1},
      {"z", c.z.vec()},
      {"batch_asr", c.batch_asr},
      {"val_asr", c.val_asr ? nlohmann::ordered_json(*c.val_asr) : nlohmann::ordered_json(nullptr)},
      {"target_label", c.target_label ? nlohmann::ordered_json(*c.target_label)
                                      : nlohmann::ordered_json(nullptr)},
      {"converged", c.converged},
      {"restarts_used", c.restarts_used},
      {"aborted_restarts", c.aborted_restarts},
      {"generator_version", c.generator_version},
      {"classifier_version", c.classifier_version},
      {"config_hash", c.config_hash},
      {"seed", c.seed}};
  std::ofstream f(std::filesystem::path(dir) / "candidate.json");
  f << meta.dump(2) << "\n";
}

inline TnTCandidate load_candidate_bundle(const std::string& dir) {
  TnTCandidate c;
  c.patch = img::load_patch((std::filesystem::path(dir) / "patch.png").string());
  std::ifstream f(std::filesystem::path(dir) / "candidate.json");
  if (!f) throw IoError("load_candidate_bundle: missing candidate.json in " + dir);
  const auto meta = nlohmann::ordered_json::parse(f);
  const auto zvec = meta.at("z").get<std::vector<double>>();
  c.z = Tensor<double>::from({1, zvec.size()}, zvec);
  c.batch_asr = meta.at("batch_asr").get<double>();
  if (!meta.at("val_asr").is_null()) c.val_asr = meta.at("val_asr").get<double>();
  if (!meta.at("target_label").is_null()) c.target_label = meta.at("target_label").get<std::size_t>();
  c.converged = meta.at("converged").get<bool>();
  c.restarts_used = meta.at("restarts_used").get<std::size_t>();
  c.aborted_restarts = meta.at("aborted_restarts").get<std::size_t>();
  c.generator_version = meta.at("generator_version").get<std::string>();
  c.classifier_version = meta.at("classifier_version").get<std::string>();
  c.config_hash = meta.at("config_hash").get<std::string>();
  c.seed = meta.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace tnt::attack
