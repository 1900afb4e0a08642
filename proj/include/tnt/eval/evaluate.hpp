#pragma once

#include <cmath>
#include <memory>
#include <variant>

#include "tnt/attack/config.hpp"
#include "tnt/attack/search.hpp"
#include "tnt/clf/classifier.hpp"
#include "tnt/common/parallel.hpp"
#include "tnt/data/dataset.hpp"
#include "tnt/eval/report.hpp"
#include "tnt/gan/models.hpp"

namespace tnt::eval {

/// ASR with exact counts over a dataset split. In targeted mode, samples
/// whose ground truth already equals y_target leave the denominator.
inline ReportCell attack_success_rate(clf::ClassifierHandle& clf, const data::LabeledDataset& ds,
                                      const std::vector<std::size_t>& indices,
                                      const img::Patch& patch, const img::Placement& placement,
                                      attack::AttackMode mode, std::size_t y_target = 0,
                                      std::size_t eval_batch = 64) {
  if (indices.empty()) throw ConfigError("attack_success_rate: empty split");
  const std::size_t canvas = clf.input_size();
  const img::Placed placed = img::place(patch, placement, canvas, canvas);
  ReportCell cell;
  for (std::size_t off = 0; off < indices.size(); off += eval_batch) {
    const std::size_t take = std::min(eval_batch, indices.size() - off);
    std::vector<std::size_t> idx(indices.begin() + off, indices.begin() + off + take);
    Tensor<double> batch = ds.store.batch(idx);
    Tensor<double> stamped({take, 3, canvas, canvas});
    for (std::size_t i = 0; i < take; ++i) {
      const img::Image xi = img::batch_to_image(batch, i);
      img::image_into_batch(img::stamp(xi, placed.delta, placed.mask), stamped, i);
    }
    const auto preds = clf.argmax(stamped);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t gt = ds.labels[idx[i]];
      if (mode == attack::AttackMode::targeted) {
        if (gt == y_target) {
          ++cell.excluded;
          continue;
        }
        cell.fooled += preds[i] == y_target;
      } else {
        cell.fooled += preds[i] != gt;
      }
      ++cell.total;
    }
  }
  if (cell.total == 0) throw ConfigError("attack_success_rate: denominator empty after exclusion");
  return cell;
}

/// ASR per canonical (or caller-chosen) placement. Placements that cannot
/// fit are reported as skipped rows rather than failing the sweep.
inline std::vector<LocationRow> location_sweep(clf::ClassifierHandle& clf,
                                               const data::LabeledDataset& ds,
                                               const std::vector<std::size_t>& indices,
                                               const img::Patch& patch,
                                               const std::vector<img::Placement>& placements,
                                               attack::AttackMode mode, std::size_t y_target = 0,
                                               int workers = 1) {
  std::vector<LocationRow> rows(placements.size());
  parallel_for(placements.size(), workers, [&](std::size_t i) {
    thread_local std::unique_ptr<clf::ClassifierHandle> local;
    clf::ClassifierHandle* c = &clf;
    if (workers > 1) {
      if (!local) local = std::make_unique<clf::ClassifierHandle>(clf.clone());
      c = local.get();
    }
    LocationRow row;
    row.location = img::to_string(placements[i].location);
    try {
      row.cell = attack_success_rate(*c, ds, indices, patch, placements[i], mode, y_target);
    } catch (const PlacementOverflow&) {
      row.skipped = true;
    }
    rows[i] = row;
  });
  return rows;
}

inline std::vector<img::Placement> canonical_placements(double scale_fraction) {
  std::vector<img::Placement> out;
  for (auto loc : img::canonical_locations()) out.push_back({loc, scale_fraction, 0, 0});
  return out;
}

/// Black-box transfer: every source-model patch evaluated on every target
/// model, untargeted. The patch is rescaled through place() to each target's
/// input size; the diagonal is the white-box ASR.
inline std::vector<TransferCell> transfer_matrix(
    const std::vector<std::pair<std::string, const img::Patch*>>& patches_by_source,
    const std::vector<std::pair<std::string, clf::ClassifierHandle*>>& target_models,
    const data::LabeledDataset& ds, const std::vector<std::size_t>& indices,
    const img::Placement& placement, int workers = 1) {
  if (patches_by_source.empty() || target_models.empty())
    throw ConfigError("transfer_matrix: need at least one source patch and one target model");
  const std::size_t n = patches_by_source.size() * target_models.size();
  std::vector<TransferCell> cells(n);
  parallel_for(n, workers, [&](std::size_t k) {
    const std::size_t si = k / target_models.size();
    const std::size_t ti = k % target_models.size();
    thread_local clf::ClassifierHandle* cloned_from = nullptr;
    thread_local std::unique_ptr<clf::ClassifierHandle> local;
    clf::ClassifierHandle* c = target_models[ti].second;
    if (workers > 1) {
      if (cloned_from != c) {
        local = std::make_unique<clf::ClassifierHandle>(c->clone());
        cloned_from = c;
      }
      c = local.get();
    }
    TransferCell cell;
    cell.source = patches_by_source[si].first;
    cell.target = target_models[ti].first;
    cell.canvas = c->input_size();
    cell.cell = attack_success_rate(*c, ds, indices, *patches_by_source[si].second, placement,
                                    attack::AttackMode::untargeted);
    cells[k] = cell;
  });
  return cells;
}

enum class BaselineKind { color, natural };

/// Occlusion/bias control: n random patches (solid colors, or crops drawn
/// from an unlabeled image store), each evaluated untargeted; returns
/// mean +/- sample standard deviation over patches.
inline BaselineStats random_patch_baseline(clf::ClassifierHandle& clf,
                                           const data::LabeledDataset& ds,
                                           const std::vector<std::size_t>& indices,
                                           BaselineKind kind, std::size_t n,
                                           const img::Placement& placement, std::uint64_t seed,
                                           const data::ImageStore* natural_source = nullptr,
                                           const img::ThresholdConfig& thr = {}, int workers = 1) {
  if (n < 2) throw ConfigError("random_patch_baseline: n must be >= 2 (std undefined)");
  if (kind == BaselineKind::natural && (natural_source == nullptr || natural_source->count() == 0))
    throw ConfigError("random_patch_baseline: natural kind needs an unlabeled image source");

  // materialize the patches up front, deterministically
  Rng rng(seed);
  std::vector<img::Patch> patches;
  patches.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (kind == BaselineKind::color) {
      img::Patch p;
      p.delta = img::Image(16, 16);
      const double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
      for (std::size_t px = 0; px < 16 * 16; ++px) {
        p.delta.pixels[px * 3 + 0] = r;
        p.delta.pixels[px * 3 + 1] = g;
        p.delta.pixels[px * 3 + 2] = b;
      }
      p.mask = img::BinaryMask(16, 16, 1);
      p.source = img::PatchSource::external_file;
      patches.push_back(std::move(p));
    } else {
      // natural: random source image, masked like any other patch
      for (std::size_t tries = 0;; ++tries) {
        const auto pick = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(natural_source->count()) - 1));
        img::Patch p;
        p.delta = natural_source->image(pick);
        p.source = img::PatchSource::external_file;
        try {
          p.mask = img::compute_mask(p.delta, thr);
          patches.push_back(img::remove_background(p));
          break;
        } catch (const EmptyPatch&) {
          if (tries > 64) throw;
        }
      }
    }
  }

  BaselineStats stats;
  stats.kind = kind == BaselineKind::color ? "color" : "natural";
  stats.per_patch_asr.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    thread_local std::unique_ptr<clf::ClassifierHandle> local;
    clf::ClassifierHandle* c = &clf;
    if (workers > 1) {
      if (!local) local = std::make_unique<clf::ClassifierHandle>(clf.clone());
      c = local.get();
    }
    stats.per_patch_asr[i] =
        attack_success_rate(*c, ds, indices, patches[i], placement, attack::AttackMode::untargeted)
            .asr();
  });
  double mean = 0.0;
  for (double v : stats.per_patch_asr) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : stats.per_patch_asr) var += (v - mean) * (v - mean);
  stats.mean = mean;
  stats.stddev = std::sqrt(var / static_cast<double>(n - 1));
  return stats;
}

/// What the size sweep rescales at each fraction: a fixed patch, or fresh
/// samples from an (adversarial) generator regenerated per size.
struct SizeSweepSource {
  const img::Patch* fixed_patch = nullptr;
  gan::GeneratorHandle* generator = nullptr;
  std::uint64_t z_seed = 7;
  img::ThresholdConfig threshold;
};

/// ASR as a function of patch area fraction (sizes must be ascending).
/// Fractions whose footprint would fall under 2x2 pixels are skipped with a
/// notation.
inline std::vector<SizeRow> size_sweep(clf::ClassifierHandle& clf, const data::LabeledDataset& ds,
                                       const std::vector<std::size_t>& indices,
                                       const SizeSweepSource& source,
                                       const std::vector<double>& sizes, attack::AttackMode mode,
                                       std::size_t y_target = 0, img::Location location = img::Location::lower_right,
                                       int workers = 1) {
  if (source.fixed_patch == nullptr && source.generator == nullptr)
    throw ConfigError("size_sweep: no patch source");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] < sizes[i - 1]) throw ConfigError("size_sweep: sizes must be ascending");

  // pre-draw per-size patches when regenerating from a generator
  std::vector<img::Patch> patches(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (source.fixed_patch) {
      patches[i] = *source.fixed_patch;
    } else {
      Rng rng(source.z_seed + i);
      for (std::size_t tries = 0;; ++tries) {
        try {
          Tensor<double> z = gan::sample_latent(rng, 1, source.generator->latent_dim);
          auto samples = gan::sample_patches(*source.generator, z, source.threshold);
          if (samples[0].ok) {
            patches[i] = samples[0].patch;
            break;
          }
        } catch (const Error&) {
        }
        if (tries > 64) throw EmptyPatch("size_sweep: generator yields no usable patch");
      }
    }
  }

  std::vector<SizeRow> rows(sizes.size());
  const std::size_t canvas = clf.input_size();
  parallel_for(sizes.size(), workers, [&](std::size_t i) {
    thread_local std::unique_ptr<clf::ClassifierHandle> local;
    clf::ClassifierHandle* c = &clf;
    if (workers > 1) {
      if (!local) local = std::make_unique<clf::ClassifierHandle>(clf.clone());
      c = local.get();
    }
    SizeRow row;
    row.fraction = sizes[i];
    const img::Placement placement{location, sizes[i], 0, 0};
    const auto geom = img::placed_geometry(patches[i].delta.height, patches[i].delta.width,
                                           placement, canvas, canvas);
    if (geom.out_h < 2 || geom.out_w < 2) {
      row.skipped = true;
    } else {
      row.cell = attack_success_rate(*c, ds, indices, patches[i], placement, mode, y_target);
    }
    rows[i] = row;
  });
  return rows;
}

}  // namespace tnt::eval
