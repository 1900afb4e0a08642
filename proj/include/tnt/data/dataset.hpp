#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/core/tensor.hpp"
#include "tnt/patch/image.hpp"

namespace tnt::data {

/// Images are stored as 8-bit CHW planes and expanded to [0,1] doubles at
/// batch-assembly time, so a dataset's numeric content is independent of how
/// it was produced or traversed.
struct ImageStore {
  std::size_t image_size = 0;  // square side
  std::vector<std::uint8_t> pixels;  // count * 3 * S * S
  std::size_t skipped = 0;           // undecodable inputs dropped during ingestion

  std::size_t count() const {
    const std::size_t per = 3 * image_size * image_size;
    return per == 0 ? 0 : pixels.size() / per;
  }

  const std::uint8_t* plane(std::size_t i) const {
    return pixels.data() + i * 3 * image_size * image_size;
  }

  img::Image image(std::size_t i) const {
    const std::size_t s = image_size;
    img::Image im(s, s);
    const std::uint8_t* p = plane(i);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < s; ++c)
          im.at(r, c, ch) = static_cast<double>(p[(ch * s + r) * s + c]) / 255.0;
    return im;
  }

  void push(const img::Image& im) {
    if (im.height != image_size || im.width != image_size)
      throw ShapeError("ImageStore::push: image size mismatch");
    const std::size_t s = image_size;
    const std::size_t base = pixels.size();
    pixels.resize(base + 3 * s * s);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < s; ++c) {
          const double v = std::clamp(im.at(r, c, ch), 0.0, 1.0) * 255.0;
          pixels[base + (ch * s + r) * s + c] = static_cast<std::uint8_t>(std::llround(v));
        }
  }

  /// Assembles (B, 3, S, S) doubles in [0,1]; optional per-sample horizontal flip.
  Tensor<double> batch(const std::vector<std::size_t>& indices,
                       const std::vector<bool>* hflip = nullptr) const {
    const std::size_t s = image_size;
    Tensor<double> out({indices.size(), 3, s, s});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const std::uint8_t* p = plane(indices[b]);
      const bool flip = hflip && (*hflip)[b];
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t r = 0; r < s; ++r)
          for (std::size_t c = 0; c < s; ++c) {
            const std::size_t src_c = flip ? s - 1 - c : c;
            out.at4(b, ch, r, c) = static_cast<double>(p[(ch * s + r) * s + src_c]) / 255.0;
          }
    }
    return out;
  }
};

struct UnlabeledDataset {
  ImageStore store;
  std::size_t size() const { return store.count(); }
};

struct LabeledDataset {
  ImageStore store;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return store.count(); }
  std::size_t num_classes() const { return class_names.size(); }

  void validate() const {
    if (labels.size() != store.count()) throw DatasetSchemaError("label count != image count");
    for (auto l : labels)
      if (l >= class_names.size()) throw DatasetSchemaError("label out of range");
  }

  /// Resolves a class by name; "car" is accepted as the common alias for the
  /// CIFAR-10 "automobile" label.
  std::size_t class_index(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == name) return i;
    if (name == "car")
      for (std::size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == "automobile") return i;
    throw ConfigError("unknown class name: " + name);
  }
};

/// Seeded subsample without replacement; the paper-style small/medium/full
/// evaluation splits are built from these index lists.
inline std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t take,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  if (take < total) idx.resize(take);
  return idx;
}

inline std::vector<std::size_t> all_indices(std::size_t total) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  return idx;
}

}  // namespace tnt::data
