#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "tnt/common/rng.hpp"
#include "tnt/data/dataset.hpp"
#include "tnt/patch/image.hpp"
#include "tnt/patch/io.hpp"

namespace tnt::data {

// ---------------------------------------------------------------------------
// Procedural stand-in corpora. The repo ships no third-party datasets; these
// generators produce a small flower-like unlabeled corpus for generator
// training and a labeled glyph corpus at 32x32 "scene" geometry for the
// classifier pipeline. Every sample is a pure function of (seed, index).
// ---------------------------------------------------------------------------

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

inline void blend(img::Image& im, std::size_t r, std::size_t c, const Rgb& col, double alpha) {
  im.at(r, c, 0) = std::clamp((1 - alpha) * im.at(r, c, 0) + alpha * col.r, 0.0, 1.0);
  im.at(r, c, 1) = std::clamp((1 - alpha) * im.at(r, c, 1) + alpha * col.g, 0.0, 1.0);
  im.at(r, c, 2) = std::clamp((1 - alpha) * im.at(r, c, 2) + alpha * col.b, 0.0, 1.0);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (index * 0x9e3779b97f4a7c15ULL + 0x853c49e6748fea9bULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RosetteStyle {
  int petals = 6;
  double hue = 0.0;          // petal hue in degrees
  double radius = 8.0;       // petal-center radius in pixels
  double rot = 0.0;
  double core_hue = 180.0;
  double petal_len_frac = 0.6;   // petal half-length / radius
  double petal_aspect = 0.55;    // width / length
  double core_frac = 0.38;       // core radius / radius
  double sat = 0.8, val = 0.9;
  double alpha = 0.95;
};

/// Petaled rosette painter shared by the unlabeled flower corpus and the
/// labeled scene classes, so both live in the same visual family.
inline void draw_rosette(img::Image& im, double cy, double cx, const RosetteStyle& st) {
  const auto petal_col = hsv(st.hue, st.sat, st.val);
  const double plen = st.petal_len_frac * st.radius;
  const double pwid = st.petal_aspect * plen;
  for (int p = 0; p < st.petals; ++p) {
    const double ang = st.rot + 2.0 * std::numbers::pi * p / st.petals;
    const double py = cy + std::sin(ang) * st.radius * 0.75;
    const double px = cx + std::cos(ang) * st.radius * 0.75;
    const double cs = std::cos(ang), sn = std::sin(ang);
    const auto r0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(py - st.radius));
    const auto r1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(im.height) - 1,
                                             static_cast<std::ptrdiff_t>(py + st.radius) + 1);
    const auto c0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(px - st.radius));
    const auto c1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(im.width) - 1,
                                             static_cast<std::ptrdiff_t>(px + st.radius) + 1);
    for (std::ptrdiff_t r = r0; r <= r1; ++r)
      for (std::ptrdiff_t c = c0; c <= c1; ++c) {
        const double dy = static_cast<double>(r) - py, dx = static_cast<double>(c) - px;
        const double lu = cs * dx + sn * dy, lv = -sn * dx + cs * dy;
        const double d = (lu * lu) / (plen * plen) + (lv * lv) / (pwid * pwid);
        if (d <= 1.0) {
          const double shade = 1.0 - 0.25 * d;
          blend(im, static_cast<std::size_t>(r), static_cast<std::size_t>(c),
                {petal_col.r * shade, petal_col.g * shade, petal_col.b * shade}, st.alpha);
        }
      }
  }
  const auto core_col = hsv(st.core_hue, st.sat, std::min(1.0, st.val + 0.05));
  const double core_r = st.core_frac * st.radius;
  const auto r0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cy - core_r));
  const auto r1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(im.height) - 1,
                                           static_cast<std::ptrdiff_t>(cy + core_r) + 1);
  const auto c0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cx - core_r));
  const auto c1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(im.width) - 1,
                                           static_cast<std::ptrdiff_t>(cx + core_r) + 1);
  for (std::ptrdiff_t r = r0; r <= r1; ++r)
    for (std::ptrdiff_t c = c0; c <= c1; ++c) {
      const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
      if (dy * dy + dx * dx <= core_r * core_r)
        blend(im, static_cast<std::size_t>(r), static_cast<std::size_t>(c), core_col, st.alpha);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Flower-like corpus (unlabeled).
// ---------------------------------------------------------------------------

/// Random rosette styling shared by the flower corpus and the scene corpus,
/// so the generator's training distribution spans the classes' visual space.
inline detail::RosetteStyle random_rosette_style(double radius, Rng& rng) {
  detail::RosetteStyle st;
  st.petals = static_cast<int>(rng.uniform_int(5, 9));
  st.hue = rng.uniform(0.0, 360.0);
  st.radius = radius;
  st.rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
  st.core_hue = std::fmod(st.hue + rng.uniform(120.0, 240.0), 360.0);
  st.petal_len_frac = rng.uniform(0.5, 0.7);
  st.petal_aspect = rng.uniform(0.45, 0.7);
  st.core_frac = rng.uniform(0.3, 0.45);
  st.sat = rng.uniform(0.45, 0.9);
  st.val = rng.uniform(0.7, 1.0);
  return st;
}

/// Petaled blob on a dark ground; luminance separates cleanly under the
/// default mask threshold.
inline img::Image synth_flower(std::size_t size, Rng& rng) {
  img::Image im(size, size);
  const double bg = rng.uniform(0.0, 0.05);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        im.at(r, c, ch) = std::clamp(bg + rng.uniform(-0.015, 0.015), 0.0, 0.08);

  const double cy = size / 2.0 + rng.uniform(-1.5, 1.5) * size / 32.0;
  const double cx = size / 2.0 + rng.uniform(-1.5, 1.5) * size / 32.0;
  const auto style = random_rosette_style(rng.uniform(0.32, 0.42) * size, rng);
  detail::draw_rosette(im, cy, cx, style);
  return im;
}

inline UnlabeledDataset synth_flower_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  UnlabeledDataset ds;
  ds.store.image_size = size;
  ds.store.pixels.reserve(count * 3 * size * size);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(detail::mix_seed(seed, i));
    ds.store.push(synth_flower(size, rng));
  }
  return ds;
}

inline void write_flower_corpus(const std::string& dir, std::size_t count, std::size_t size,
                                std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(detail::mix_seed(seed, i));
    char name[32];
    std::snprintf(name, sizeof(name), "flower_%05zu.png", i);
    img::save_image((std::filesystem::path(dir) / name).string(), synth_flower(size, rng));
  }
}

// ---------------------------------------------------------------------------
// Labeled glyph scenes (classifier stand-in corpus).
// ---------------------------------------------------------------------------

struct SceneConfig {
  std::size_t image_size = 32;
  std::size_t num_classes = 10;
  double pattern_half_lo = 0.22;  // glyph half-size as a fraction of the image side
  double pattern_half_hi = 0.38;
  double distractor_prob = 1.0;
  double distractor_alpha_lo = 0.55;
  double distractor_alpha_hi = 0.85;
  double noise_sigma = 0.10;
  double hue_jitter = 25.0;  // degrees around the class hue center
};

inline const std::vector<std::string>& scene_class_names10() {
  static const std::vector<std::string> names = {"plane", "car",  "bird",  "cat",  "deer",
                                                 "dog",   "frog", "horse", "ship", "truck"};
  return names;
}

inline std::vector<std::string> scene_class_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) {
    if (k <= 10 && i < scene_class_names10().size()) names.push_back(scene_class_names10()[i]);
    else names.push_back("class" + std::to_string(i));
  }
  return names;
}

/// Class-conditioned rosette style: the petal count and the hue family both
/// carry the label. Classes therefore live inside the same visual family the
/// unlabeled corpus teaches the generator. The labeled object is vivid while
/// distractors stay dull, so saliency itself is a learnable cue.
inline detail::RosetteStyle class_rosette_style(std::size_t label, const SceneConfig& cfg,
                                                double radius, Rng& rng, bool distractor) {
  auto st = random_rosette_style(radius, rng);
  st.petals = 5 + static_cast<int>(label % 5);
  const double hue_center = 360.0 * static_cast<double>(label) / static_cast<double>(cfg.num_classes);
  st.hue = std::fmod(hue_center + rng.uniform(-cfg.hue_jitter, cfg.hue_jitter) + 360.0, 360.0);
  if (distractor) {
    st.sat = rng.uniform(0.30, 0.50);
    st.val = rng.uniform(0.50, 0.70);
  } else {
    st.sat = rng.uniform(0.70, 0.88);
    st.val = rng.uniform(0.80, 0.95);
  }
  return st;
}

inline img::Image synth_scene(std::size_t label, const SceneConfig& cfg, Rng& rng) {
  const std::size_t s = cfg.image_size;
  img::Image im(s, s);
  // dull background with a soft gradient
  const auto bg = detail::hsv(rng.uniform(0.0, 360.0), rng.uniform(0.1, 0.4), rng.uniform(0.2, 0.5));
  const double gy = rng.uniform(-0.1, 0.1), gx = rng.uniform(-0.1, 0.1);
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t c = 0; c < s; ++c) {
      const double grad = gy * (static_cast<double>(r) / s - 0.5) + gx * (static_cast<double>(c) / s - 0.5);
      im.at(r, c, 0) = std::clamp(bg.r + grad, 0.0, 1.0);
      im.at(r, c, 1) = std::clamp(bg.g + grad, 0.0, 1.0);
      im.at(r, c, 2) = std::clamp(bg.b + grad, 0.0, 1.0);
    }

  // fainter distractor from another class first, then the labeled object
  if (rng.uniform() < cfg.distractor_prob && cfg.num_classes > 1) {
    auto other = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.num_classes) - 2));
    if (other >= label) ++other;
    const double radius = rng.uniform(cfg.pattern_half_lo, cfg.pattern_half_hi) * s;
    auto st = class_rosette_style(other, cfg, radius, rng, /*distractor=*/true);
    st.alpha = rng.uniform(cfg.distractor_alpha_lo, cfg.distractor_alpha_hi);
    const double cy = rng.uniform(radius, static_cast<double>(s) - radius);
    const double cx = rng.uniform(radius, static_cast<double>(s) - radius);
    detail::draw_rosette(im, cy, cx, st);
  }

  const double radius = rng.uniform(cfg.pattern_half_lo, cfg.pattern_half_hi) * s;
  const auto st = class_rosette_style(label, cfg, radius, rng, /*distractor=*/false);
  const double cy = rng.uniform(radius, static_cast<double>(s) - radius);
  const double cx = rng.uniform(radius, static_cast<double>(s) - radius);
  detail::draw_rosette(im, cy, cx, st);

  for (auto& v : im.pixels) v = std::clamp(v + rng.normal(0.0, cfg.noise_sigma), 0.0, 1.0);
  return im;
}

/// Deterministic labeled dataset: sample i has label i % num_classes and is a
/// pure function of (seed, i).
inline LabeledDataset synth_scene_dataset(std::size_t count, const SceneConfig& cfg,
                                          std::uint64_t seed) {
  LabeledDataset ds;
  ds.store.image_size = cfg.image_size;
  ds.class_names = scene_class_names(cfg.num_classes);
  ds.store.pixels.reserve(count * 3 * cfg.image_size * cfg.image_size);
  ds.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % cfg.num_classes;
    Rng rng(detail::mix_seed(seed, i));
    ds.store.push(synth_scene(label, cfg, rng));
    ds.labels.push_back(label);
  }
  return ds;
}

inline void write_scene_corpus(const std::string& dir, std::size_t per_class,
                               const SceneConfig& cfg, std::uint64_t seed) {
  const auto names = scene_class_names(cfg.num_classes);
  for (std::size_t c = 0; c < cfg.num_classes; ++c)
    std::filesystem::create_directories(std::filesystem::path(dir) / names[c]);
  for (std::size_t i = 0; i < per_class * cfg.num_classes; ++i) {
    const std::size_t label = i % cfg.num_classes;
    Rng rng(detail::mix_seed(seed, i));
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05zu.png", i);
    img::save_image((std::filesystem::path(dir) / names[label] / name).string(),
                    synth_scene(label, cfg, rng));
  }
}

}  // namespace tnt::data
