#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/data/dataset.hpp"
#include "tnt/gan/models.hpp"
#include "tnt/nn/adam.hpp"
#include "tnt/patch/io.hpp"

namespace tnt::gan {

struct GanTrainConfig {
  double lambda_gp = 10.0;
  std::size_t critic_steps_per_gen_step = 5;
  std::size_t batch_size = 32;
  std::size_t total_steps = 2000;  // generator updates
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::uint64_t seed = 1;
  std::size_t latent_dim = 128;
  std::size_t output_size = 32;
  std::size_t base_channels = 64;
  std::size_t checkpoint_every = 500;
  std::size_t sample_every = 500;
  bool hflip_augment = true;

  void validate() const {
    if (lambda_gp < 0) throw ConfigError("gan: lambda_gp must be >= 0");
    if (critic_steps_per_gen_step < 1 || batch_size < 1) throw ConfigError("gan: counts must be >= 1");
  }
};

namespace detail {

/// Per-sample input gradients of the critic: rows of dD_b/dx_b.
inline Tensor<double> critic_input_grad(CriticHandle& critic, const Tensor<double>& x) {
  critic.net.zero_grad();
  Tensor<double> scores = critic.forward(x, true);
  Tensor<double> upstream(scores.shape(), 1.0);
  return critic.backward(upstream);
}

struct PenaltyParts {
  double penalty = 0.0;               // mean_b (||g_b|| - 1)^2
  Tensor<double> xhat;                // interpolates
  Tensor<double> unit_dirs;           // per-sample normalized penalty directions
  std::vector<double> fd_weights;     // per-sample ||v_b|| = 2|‖g_b‖-1| / B
};

inline PenaltyParts penalty_with_directions(CriticHandle& critic, const Tensor<double>& real,
                                            const Tensor<double>& fake, std::uint64_t seed) {
  if (!real.same_shape(fake)) throw ShapeError("gradient_penalty: real/fake shape mismatch");
  const std::size_t b = real.dim(0);
  const std::size_t per = real.numel() / b;
  PenaltyParts parts;
  parts.xhat = Tensor<double>(real.shape());
  Rng rng(seed);
  for (std::size_t i = 0; i < b; ++i) {
    const double u = rng.uniform();
    for (std::size_t j = 0; j < per; ++j)
      parts.xhat[i * per + j] = u * real[i * per + j] + (1.0 - u) * fake[i * per + j];
  }
  Tensor<double> grads = critic_input_grad(critic, parts.xhat);
  parts.unit_dirs = Tensor<double>(real.shape());
  parts.fd_weights.assign(b, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < per; ++j) sq += grads[i * per + j] * grads[i * per + j];
    const double norm = std::sqrt(sq);
    acc += (norm - 1.0) * (norm - 1.0);
    if (norm > 1e-12) {
      const double c = 2.0 * (norm - 1.0) / (static_cast<double>(b) * norm);  // v_b = c * g_b
      const double vnorm = std::abs(c) * norm;
      parts.fd_weights[i] = vnorm;
      const double dir_scale = (c >= 0 ? 1.0 : -1.0) / norm;
      for (std::size_t j = 0; j < per; ++j)
        parts.unit_dirs[i * per + j] = grads[i * per + j] * dir_scale;
    }
  }
  parts.penalty = acc / static_cast<double>(b);
  return parts;
}

inline void add_weighted_param_grads(CriticHandle& critic, const Tensor<double>& x,
                                     const std::vector<double>& row_weights) {
  Tensor<double> scores = critic.forward(x, true);
  Tensor<double> upstream(scores.shape());
  for (std::size_t i = 0; i < row_weights.size(); ++i) upstream.at2(i, 0) = row_weights[i];
  critic.backward(upstream);
}

}  // namespace detail

/// Mean over the batch of (||∇_x D(x̂)||₂ − 1)², with x̂ the per-sample uniform
/// interpolation between real and fake. The seed pins the interpolation draws.
inline double gradient_penalty(CriticHandle& critic, const Tensor<double>& real,
                               const Tensor<double>& fake, std::uint64_t seed) {
  return detail::penalty_with_directions(critic, real, fake, seed).penalty;
}

struct WganLosses {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double penalty = 0.0;
};

/// critic_loss = mean D(fake) − mean D(real) + λ·penalty;
/// generator_loss = −mean D(fake), with fake = G(z).
inline WganLosses wgan_gp_losses(CriticHandle& critic, GeneratorHandle& generator,
                                 const Tensor<double>& real_batch, const Tensor<double>& z_batch,
                                 double lambda_gp, std::uint64_t seed) {
  Tensor<double> fake = generator.forward(z_batch, true);
  Tensor<double> d_fake = critic.forward(fake, true);
  Tensor<double> d_real = critic.forward(real_batch, true);
  WganLosses out;
  out.generator_loss = -d_fake.mean();
  out.penalty = lambda_gp > 0 ? gradient_penalty(critic, real_batch, fake, seed) : 0.0;
  out.critic_loss = d_fake.mean() - d_real.mean() + lambda_gp * out.penalty;
  return out;
}

/// Accumulates ∂critic_loss/∂θ_D into the critic's parameter gradients.
///
/// The Wasserstein part is plain backprop. The penalty part needs the mixed
/// second derivative ∂²D/∂θ∂x; it is evaluated as an exact-direction central
/// difference of ∇_θ D at x̂ ± h·v̂, which keeps the whole library first-order.
/// Returns the critic loss value at the current parameters.
inline WganLosses accumulate_critic_gradients(CriticHandle& critic, const Tensor<double>& real,
                                              const Tensor<double>& fake, double lambda_gp,
                                              std::uint64_t penalty_seed, double fd_step = 1e-4) {
  const std::size_t b = real.dim(0);
  const double invb = 1.0 / static_cast<double>(b);
  WganLosses losses;

  detail::PenaltyParts parts;
  if (lambda_gp > 0) parts = detail::penalty_with_directions(critic, real, fake, penalty_seed);

  critic.net.zero_grad();
  {
    Tensor<double> d_fake = critic.forward(fake, true);
    losses.generator_loss = -d_fake.mean();
    Tensor<double> up(d_fake.shape(), invb);
    critic.backward(up);
    losses.critic_loss += d_fake.mean();
  }
  {
    Tensor<double> d_real = critic.forward(real, true);
    Tensor<double> up(d_real.shape(), -invb);
    critic.backward(up);
    losses.critic_loss -= d_real.mean();
  }
  if (lambda_gp > 0) {
    losses.penalty = parts.penalty;
    losses.critic_loss += lambda_gp * parts.penalty;
    Tensor<double> x_plus = parts.xhat;
    x_plus.axpy(fd_step, parts.unit_dirs);
    Tensor<double> x_minus = parts.xhat;
    x_minus.axpy(-fd_step, parts.unit_dirs);
    std::vector<double> w(b);
    for (std::size_t i = 0; i < b; ++i) w[i] = lambda_gp * parts.fd_weights[i] / (2.0 * fd_step);
    detail::add_weighted_param_grads(critic, x_plus, w);
    for (auto& v : w) v = -v;
    detail::add_weighted_param_grads(critic, x_minus, w);
  }
  return losses;
}

struct GanTrainResult {
  GeneratorHandle generator;
  CriticHandle critic;
  std::string final_checkpoint;
};

/// WGAN-GP training on an unlabeled dataset. Single-threaded state
/// transitions; given a fixed seed, runs are bit-reproducible. Emits periodic
/// checkpoints, sample grids, and a line-delimited JSON training log under
/// out_dir (pass an empty out_dir to skip artifacts).
inline GanTrainResult train_wgan_gp(const data::UnlabeledDataset& dataset,
                                    const GanTrainConfig& cfg, const std::string& out_dir = "") {
  cfg.validate();
  if (dataset.size() == 0) throw DatasetEmpty("train_wgan_gp: empty dataset");
  if (dataset.store.image_size != cfg.output_size)
    throw ConfigError("train_wgan_gp: dataset image size != generator output_size");

  GanTrainResult result{build_generator(cfg.latent_dim, cfg.output_size, cfg.base_channels, cfg.seed),
                        build_critic(cfg.output_size, cfg.base_channels, cfg.seed + 1),
                        ""};
  auto& gen = result.generator;
  auto& critic = result.critic;

  Rng rng(cfg.seed + 2);
  nn::Adam<double> opt_g(cfg.lr, cfg.beta1, cfg.beta2);
  nn::Adam<double> opt_d(cfg.lr, cfg.beta1, cfg.beta2);
  auto params_g = gen.net.parameters();
  auto params_d = critic.net.parameters();

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(std::filesystem::path(out_dir) / "train_log.jsonl");
  }

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // trigger shuffle on first use

  auto next_batch = [&]() {
    std::vector<std::size_t> idx(cfg.batch_size);
    std::vector<bool> flip(cfg.batch_size);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      idx[i] = order[cursor++];
      flip[i] = cfg.hflip_augment && rng.uniform() < 0.5;
    }
    return dataset.store.batch(idx, &flip);
  };

  std::string last_good;
  auto save_ckpt = [&](std::size_t step) {
    if (out_dir.empty()) return std::string();
    auto ckpt = generator_checkpoint(gen);
    ckpt.meta["step"] = step;
    ckpt.meta["config"] = nn::Json{{"lambda_gp", cfg.lambda_gp},
                                   {"critic_steps_per_gen_step", cfg.critic_steps_per_gen_step},
                                   {"batch_size", cfg.batch_size},
                                   {"total_steps", cfg.total_steps},
                                   {"lr", cfg.lr},
                                   {"beta1", cfg.beta1},
                                   {"beta2", cfg.beta2},
                                   {"seed", cfg.seed}};
    char name[64];
    std::snprintf(name, sizeof(name), "generator_step%06zu.ckpt", step);
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    nn::save_checkpoint(path, ckpt);
    return path;
  };

  auto save_samples = [&](std::size_t step) {
    if (out_dir.empty()) return;
    const std::size_t grid = 4;
    Rng sample_rng(cfg.seed + 99);
    Tensor<double> z = sample_latent(sample_rng, grid * grid, cfg.latent_dim);
    Tensor<double> out = gen.forward(z, false);
    const std::size_t s = cfg.output_size;
    img::Image sheet(grid * s, grid * s, 0.0);
    for (std::size_t i = 0; i < grid * grid; ++i) {
      const img::Image tile = img::batch_to_image(out, i);
      const std::size_t r0 = (i / grid) * s, c0 = (i % grid) * s;
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < s; ++c)
          for (std::size_t ch = 0; ch < 3; ++ch)
            sheet.at(r0 + r, c0 + c, ch) = tile.at(r, c, ch);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "samples_step%06zu.png", step);
    img::save_image((std::filesystem::path(out_dir) / name).string(), sheet);
  };

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    WganLosses losses;
    for (std::size_t cs = 0; cs < cfg.critic_steps_per_gen_step; ++cs) {
      Tensor<double> real = next_batch();
      Tensor<double> z = sample_latent(rng, cfg.batch_size, cfg.latent_dim);
      Tensor<double> fake = gen.forward(z, true);
      losses = accumulate_critic_gradients(critic, real, fake, cfg.lambda_gp, rng.next_u64());
      if (!std::isfinite(losses.critic_loss))
        throw TrainingDiverged("train_wgan_gp: non-finite critic loss at step " + std::to_string(step),
                               last_good);
      opt_d.step(params_d);
    }

    // generator update
    Tensor<double> z = sample_latent(rng, cfg.batch_size, cfg.latent_dim);
    gen.net.zero_grad();
    critic.net.zero_grad();
    Tensor<double> fake = gen.forward(z, true);
    Tensor<double> d_fake = critic.forward(fake, true);
    const double gen_loss = -d_fake.mean();
    if (!std::isfinite(gen_loss))
      throw TrainingDiverged("train_wgan_gp: non-finite generator loss at step " + std::to_string(step),
                             last_good);
    Tensor<double> up(d_fake.shape(), -1.0 / static_cast<double>(cfg.batch_size));
    Tensor<double> d_fake_grad = critic.backward(up);
    gen.backward(d_fake_grad);
    opt_g.step(params_g);

    if (log.is_open()) {
      nn::Json line{{"step", step},
                    {"critic_loss", losses.critic_loss},
                    {"gen_loss", gen_loss},
                    {"penalty", losses.penalty}};
      log << line.dump() << "\n";
    }
    if (cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0) {
      const std::string p = save_ckpt(step + 1);
      if (!p.empty()) last_good = p;
    }
    if (cfg.sample_every && (step + 1) % cfg.sample_every == 0) save_samples(step + 1);
  }

  result.final_checkpoint = save_ckpt(cfg.total_steps);
  return result;
}

}  // namespace tnt::gan
