#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/core/tensor.hpp"
#include "tnt/nn/layers.hpp"
#include "tnt/nn/serialize.hpp"
#include "tnt/patch/image.hpp"
#include "tnt/patch/ops.hpp"

namespace tnt::gan {

// DCGAN-style pair: transposed-convolution generator, strided-convolution
// critic. Depth follows the output size (4x4 head doubled up to the target);
// the full layer table is listed in docs/architectures.md.

inline std::size_t upsample_levels(std::size_t output_size) {
  std::size_t s = output_size, n = 0;
  while (s > 4) {
    if (s % 2 != 0) throw ConfigError("generator output_size must be 4*2^n (16..128)");
    s /= 2;
    ++n;
  }
  if (s != 4 || n == 0) throw ConfigError("generator output_size must be 4*2^n (16..128)");
  return n;
}

struct GeneratorHandle {
  nn::Sequential<double> net;
  std::size_t latent_dim = 128;
  std::size_t output_size = 32;
  std::size_t base_channels = 64;
  std::uint64_t seed = 0;
  std::string version = "dcgan-g1";
  bool finetuned = false;
  std::string source_checkpoint;

  /// (B, latent_dim) -> (B, 3, S, S), squashed to [0,1] by the final sigmoid.
  Tensor<double> forward(const Tensor<double>& z, bool training) {
    if (z.rank() != 2 || z.dim(1) != latent_dim)
      throw ShapeError("generator: expected latent batch (B," + std::to_string(latent_dim) + ")");
    return net.forward(z, training);
  }

  Tensor<double> backward(const Tensor<double>& grad_out) { return net.backward(grad_out); }
};

struct CriticHandle {
  nn::Sequential<double> net;
  std::size_t input_size = 32;
  std::size_t base_channels = 64;
  std::uint64_t seed = 0;
  std::string version = "dcgan-d1";

  /// (B, 3, S, S) -> (B, 1) real-valued scores.
  Tensor<double> forward(const Tensor<double>& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != input_size || x.dim(3) != input_size)
      throw ShapeError("critic: expected (B,3," + std::to_string(input_size) + "," +
                       std::to_string(input_size) + ")");
    return net.forward(x, training);
  }

  Tensor<double> backward(const Tensor<double>& grad_out) { return net.backward(grad_out); }
};

inline GeneratorHandle build_generator(std::size_t latent_dim, std::size_t output_size,
                                       std::size_t base_channels, std::uint64_t seed) {
  const std::size_t levels = upsample_levels(output_size);
  GeneratorHandle g;
  g.latent_dim = latent_dim;
  g.output_size = output_size;
  g.base_channels = base_channels;
  g.seed = seed;
  Rng rng(seed);
  std::size_t ch = base_channels << (levels - 1);
  g.net.emplace<nn::Dense<double>>(latent_dim, ch * 4 * 4, rng);
  g.net.emplace<nn::ToImage<double>>(ch, 4, 4);
  g.net.emplace<nn::BatchNorm2d<double>>(ch);
  g.net.emplace<nn::ReLU<double>>();
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    g.net.emplace<nn::ConvTranspose2d<double>>(ch, ch / 2, 4, 2, 1, rng);
    g.net.emplace<nn::BatchNorm2d<double>>(ch / 2);
    g.net.emplace<nn::ReLU<double>>();
    ch /= 2;
  }
  g.net.emplace<nn::ConvTranspose2d<double>>(ch, 3, 4, 2, 1, rng);
  g.net.emplace<nn::Sigmoid<double>>();
  return g;
}

inline CriticHandle build_critic(std::size_t input_size, std::size_t base_channels,
                                 std::uint64_t seed) {
  const std::size_t levels = upsample_levels(input_size);
  CriticHandle d;
  d.input_size = input_size;
  d.base_channels = base_channels;
  d.seed = seed;
  Rng rng(seed);
  std::size_t cin = 3, cout = base_channels;
  for (std::size_t l = 0; l < levels; ++l) {
    d.net.emplace<nn::Conv2d<double>>(cin, cout, 4, 2, 1, rng);
    d.net.emplace<nn::LeakyReLU<double>>(0.2);
    cin = cout;
    cout *= 2;
  }
  d.net.emplace<nn::Flatten<double>>();
  d.net.emplace<nn::Dense<double>>(cin * 4 * 4, 1, rng);
  return d;
}

inline Tensor<double> sample_latent(Rng& rng, std::size_t batch, std::size_t latent_dim) {
  Tensor<double> z({batch, latent_dim});
  for (auto& v : z.vec()) v = rng.normal();
  return z;
}

// --- checkpointing ----------------------------------------------------------

inline nn::Checkpoint generator_checkpoint(GeneratorHandle& g) {
  nn::Checkpoint ckpt;
  ckpt.meta = nn::Json{{"format_version", 1},
                       {"kind", "generator"},
                       {"version", g.version},
                       {"latent_dim", g.latent_dim},
                       {"output_size", g.output_size},
                       {"base_channels", g.base_channels},
                       {"seed", g.seed},
                       {"finetuned", g.finetuned},
                       {"source_checkpoint", g.source_checkpoint}};
  for (auto& [name, t] : nn::snapshot_state(g.net)) ckpt.tensors.emplace_back(name, t);
  return ckpt;
}

inline GeneratorHandle generator_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "generator")
    throw IoError("checkpoint kind mismatch: expected generator");
  GeneratorHandle g = build_generator(ckpt.meta.at("latent_dim").get<std::size_t>(),
                                      ckpt.meta.at("output_size").get<std::size_t>(),
                                      ckpt.meta.at("base_channels").get<std::size_t>(),
                                      ckpt.meta.at("seed").get<std::uint64_t>());
  g.finetuned = ckpt.meta.value("finetuned", false);
  g.source_checkpoint = ckpt.meta.value("source_checkpoint", "");
  nn::restore_state(g.net, ckpt.tensors);
  return g;
}

inline nn::Checkpoint critic_checkpoint(CriticHandle& d) {
  nn::Checkpoint ckpt;
  ckpt.meta = nn::Json{{"format_version", 1},
                       {"kind", "critic"},
                       {"version", d.version},
                       {"input_size", d.input_size},
                       {"base_channels", d.base_channels},
                       {"seed", d.seed}};
  for (auto& [name, t] : nn::snapshot_state(d.net)) ckpt.tensors.emplace_back(name, t);
  return ckpt;
}

inline CriticHandle critic_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "critic")
    throw IoError("checkpoint kind mismatch: expected critic");
  CriticHandle d = build_critic(ckpt.meta.at("input_size").get<std::size_t>(),
                                ckpt.meta.at("base_channels").get<std::size_t>(),
                                ckpt.meta.at("seed").get<std::uint64_t>());
  nn::restore_state(d.net, ckpt.tensors);
  return d;
}

// --- sampling ---------------------------------------------------------------

struct PatchSample {
  bool ok = false;
  img::Patch patch;
  std::string error;
};

/// Decodes a batch of latents into patches; masks come from compute_mask and
/// the background is removed. Per-sample failures (EmptyPatch) are reported,
/// not thrown.
inline std::vector<PatchSample> sample_patches(GeneratorHandle& gen, const Tensor<double>& z_batch,
                                               const img::ThresholdConfig& thr = {}) {
  Tensor<double> out = gen.forward(z_batch, false);
  std::vector<PatchSample> result(out.dim(0));
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    PatchSample& s = result[i];
    img::Patch p;
    p.delta = img::batch_to_image(out, i);
    p.source = gen.finetuned ? img::PatchSource::finetuned_sample : img::PatchSource::generator_sample;
    try {
      p.mask = img::compute_mask(p.delta, thr);
      s.patch = img::remove_background(p);
      s.ok = true;
    } catch (const EmptyPatch& e) {
      s.error = e.what();
    }
  }
  return result;
}

}  // namespace tnt::gan
