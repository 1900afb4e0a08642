#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/core/tensor.hpp"

namespace tnt::img {

/// RGB image, HWC layout, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  static constexpr std::size_t channels = 3;
  std::vector<double> pixels;  // height * width * 3, row-major HWC

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w * channels, fill) {}

  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return pixels[(r * width + c) * channels + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(r * width + c) * channels + ch];
  }

  std::size_t numel() const { return pixels.size(); }

  bool same_size(const Image& o) const { return height == o.height && width == o.width; }

  void validate() const {
    if (height < 1 || width < 1) throw ShapeError("Image: height and width must be >= 1");
    if (pixels.size() != height * width * channels) throw ShapeError("Image: pixel buffer size mismatch");
    for (double v : pixels)
      if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("Image: pixel outside [0,1]");
  }
};

/// Per-pixel {0,1} mask over an image canvas.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;  // height * width

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), bits(h * w, fill) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return bits[r * width + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * width + c]; }

  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }

  bool same_size(const Image& o) const { return height == o.height && width == o.width; }
};

enum class PatchSource { generator_sample, finetuned_sample, external_file };

inline const char* to_string(PatchSource s) {
  switch (s) {
    case PatchSource::generator_sample: return "generator_sample";
    case PatchSource::finetuned_sample: return "finetuned_sample";
    case PatchSource::external_file: return "external_file";
  }
  return "unknown";
}

/// A generated patch: raw image, its foreground mask, and where it came from.
struct Patch {
  Image delta;
  BinaryMask mask;
  PatchSource source = PatchSource::generator_sample;
};

enum class Location {
  lower_right,
  upper_right,
  upper_left,
  lower_left,
  center,
  top,
  bottom,
  left,
  right,
  custom
};

inline const char* to_string(Location l) {
  switch (l) {
    case Location::lower_right: return "lower_right";
    case Location::upper_right: return "upper_right";
    case Location::upper_left: return "upper_left";
    case Location::lower_left: return "lower_left";
    case Location::center: return "center";
    case Location::top: return "top";
    case Location::bottom: return "bottom";
    case Location::left: return "left";
    case Location::right: return "right";
    case Location::custom: return "custom";
  }
  return "unknown";
}

inline std::optional<Location> location_from_string(const std::string& s) {
  for (auto l : {Location::lower_right, Location::upper_right, Location::upper_left,
                 Location::lower_left, Location::center, Location::top, Location::bottom,
                 Location::left, Location::right, Location::custom}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

/// Where and how large a patch lands on a canvas. scale_fraction is
/// patch area / canvas area. Row/col are top-left offsets for custom spots.
struct Placement {
  Location location = Location::lower_right;
  double scale_fraction = 0.2;
  std::size_t row = 0;
  std::size_t col = 0;

  void validate() const {
    if (!(scale_fraction > 0.0 && scale_fraction <= 1.0))
      throw ConfigError("Placement: scale_fraction must be in (0,1]");
  }
};

inline const std::vector<Location>& canonical_locations() {
  static const std::vector<Location> locs = {
      Location::lower_right, Location::upper_right, Location::upper_left,
      Location::lower_left,  Location::center,      Location::top,
      Location::bottom,      Location::left,        Location::right};
  return locs;
}

// Conversions between HWC images and (N,3,H,W) network batches.

inline Image batch_to_image(const Tensor<double>& batch, std::size_t index) {
  if (batch.rank() != 4 || batch.dim(1) != 3) throw ShapeError("batch_to_image: expected (N,3,H,W)");
  const std::size_t h = batch.dim(2), w = batch.dim(3);
  Image im(h, w);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) im.at(r, c, ch) = batch.at4(index, ch, r, c);
  return im;
}

inline void image_into_batch(const Image& im, Tensor<double>& batch, std::size_t index) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != im.height || batch.dim(3) != im.width)
    throw ShapeError("image_into_batch: shape mismatch");
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t r = 0; r < im.height; ++r)
      for (std::size_t c = 0; c < im.width; ++c) batch.at4(index, ch, r, c) = im.at(r, c, ch);
}

inline Tensor<double> image_to_tensor(const Image& im) {
  Tensor<double> t({1, 3, im.height, im.width});
  image_into_batch(im, t, 0);
  return t;
}

}  // namespace tnt::img
