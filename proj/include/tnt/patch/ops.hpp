#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "tnt/patch/image.hpp"
#include "tnt/patch/resize.hpp"

namespace tnt::img {

enum class ThresholdMode { fixed, otsu };

struct ThresholdConfig {
  ThresholdMode mode = ThresholdMode::fixed;
  double threshold = 0.1;  // used in fixed mode; luminance above it is foreground
};

inline double luminance(const Image& im, std::size_t r, std::size_t c) {
  return (im.at(r, c, 0) + im.at(r, c, 1) + im.at(r, c, 2)) / 3.0;
}

namespace detail {

/// Otsu threshold over a 256-bin luminance histogram; returns the bin edge
/// maximizing inter-class variance.
inline double otsu_threshold(const Image& im) {
  std::array<std::size_t, 256> hist{};
  const std::size_t total = im.height * im.width;
  for (std::size_t r = 0; r < im.height; ++r)
    for (std::size_t c = 0; c < im.width; ++c) {
      auto bin = static_cast<std::size_t>(std::clamp(luminance(im, r, c) * 255.0, 0.0, 255.0));
      ++hist[bin];
    }
  double sum_all = 0.0;
  for (std::size_t i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];
  double sum_bg = 0.0;
  std::size_t count_bg = 0;
  double best_var = -1.0;
  std::size_t best_lo = 0, best_hi = 0;  // plateau of equally good thresholds
  for (std::size_t t = 0; t < 256; ++t) {
    count_bg += hist[t];
    if (count_bg == 0) continue;
    const std::size_t count_fg = total - count_bg;
    if (count_fg == 0) break;
    sum_bg += static_cast<double>(t) * hist[t];
    const double mean_bg = sum_bg / count_bg;
    const double mean_fg = (sum_all - sum_bg) / count_fg;
    const double between = static_cast<double>(count_bg) * count_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
    if (between > best_var) {
      best_var = between;
      best_lo = best_hi = t;
    } else if (between == best_var) {
      best_hi = t;
    }
  }
  const double best_bin = (static_cast<double>(best_lo) + static_cast<double>(best_hi)) / 2.0;
  return (best_bin + 0.5) / 255.0;
}

}  // namespace detail

/// Marks foreground pixels of a raw patch: luminance (channel mean) above the
/// configured threshold, or above the Otsu split in otsu mode.
/// Throws EmptyPatch when nothing clears the threshold.
inline BinaryMask compute_mask(const Image& delta, const ThresholdConfig& cfg = {}) {
  delta.validate();
  const double thr = cfg.mode == ThresholdMode::fixed ? cfg.threshold : detail::otsu_threshold(delta);
  BinaryMask mask(delta.height, delta.width);
  std::size_t ones = 0;
  for (std::size_t r = 0; r < delta.height; ++r)
    for (std::size_t c = 0; c < delta.width; ++c) {
      const std::uint8_t v = luminance(delta, r, c) > thr ? 1 : 0;
      mask.at(r, c) = v;
      ones += v;
    }
  if (ones == 0) throw EmptyPatch("compute_mask: no pixel above threshold");
  return mask;
}

/// delta' = delta ⊙ mask. Idempotent; afterwards delta' is zero wherever the
/// mask is zero.
inline Patch remove_background(const Patch& patch) {
  if (!patch.mask.same_size(patch.delta))
    throw ShapeError("remove_background: mask/delta size mismatch");
  Patch out = patch;
  for (std::size_t r = 0; r < out.delta.height; ++r)
    for (std::size_t c = 0; c < out.delta.width; ++c)
      if (patch.mask.at(r, c) == 0)
        for (std::size_t ch = 0; ch < Image::channels; ++ch) out.delta.at(r, c, ch) = 0.0;
  return out;
}

/// Resolved footprint of a placed patch on a canvas.
struct PlacedGeometry {
  std::size_t out_h = 0, out_w = 0;  // scaled patch size
  std::size_t row0 = 0, col0 = 0;    // top-left offset on the canvas
};

/// Scales the patch so its area is scale_fraction of the canvas (aspect ratio
/// preserved, rounded) and resolves the offset for the requested location.
/// Corner and edge placements sit flush against the border.
inline PlacedGeometry placed_geometry(std::size_t patch_h, std::size_t patch_w,
                                      const Placement& placement, std::size_t canvas_h,
                                      std::size_t canvas_w) {
  placement.validate();
  if (patch_h == 0 || patch_w == 0) throw ShapeError("place: empty patch");
  const double target_area = placement.scale_fraction * static_cast<double>(canvas_h) * static_cast<double>(canvas_w);
  const double s = std::sqrt(target_area / (static_cast<double>(patch_h) * static_cast<double>(patch_w)));
  // Rounding may push a full-coverage placement one pixel past the border;
  // only a genuinely oversized footprint is an error.
  const auto scaled_dim = [](std::size_t n, double f, std::size_t limit) {
    auto d = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * f)));
    if (d > limit) {
      if (static_cast<std::size_t>(std::floor(n * f)) <= limit) return limit;
      throw PlacementOverflow("place: scaled patch exceeds canvas");
    }
    return d;
  };
  PlacedGeometry g;
  g.out_h = scaled_dim(patch_h, s, canvas_h);
  g.out_w = scaled_dim(patch_w, s, canvas_w);
  const std::size_t max_r = canvas_h - g.out_h;
  const std::size_t max_c = canvas_w - g.out_w;
  switch (placement.location) {
    case Location::upper_left: g.row0 = 0; g.col0 = 0; break;
    case Location::upper_right: g.row0 = 0; g.col0 = max_c; break;
    case Location::lower_left: g.row0 = max_r; g.col0 = 0; break;
    case Location::lower_right: g.row0 = max_r; g.col0 = max_c; break;
    case Location::center: g.row0 = max_r / 2; g.col0 = max_c / 2; break;
    case Location::top: g.row0 = 0; g.col0 = max_c / 2; break;
    case Location::bottom: g.row0 = max_r; g.col0 = max_c / 2; break;
    case Location::left: g.row0 = max_r / 2; g.col0 = 0; break;
    case Location::right: g.row0 = max_r / 2; g.col0 = max_c; break;
    case Location::custom:
      if (placement.row + g.out_h > canvas_h || placement.col + g.out_w > canvas_w)
        throw PlacementOverflow("place: custom offset pushes patch outside canvas");
      g.row0 = placement.row;
      g.col0 = placement.col;
      break;
  }
  return g;
}

struct Placed {
  Image delta;      // canvas-sized, zero outside the footprint
  BinaryMask mask;  // canvas-sized, zero outside the footprint
  PlacedGeometry geometry;
};

/// Scales and positions a patch on an empty canvas. The image is resampled
/// bilinearly, the mask nearest-neighbor (it stays binary by construction).
inline Placed place(const Patch& patch, const Placement& placement, std::size_t canvas_h,
                    std::size_t canvas_w) {
  if (canvas_h < 1 || canvas_w < 1) throw ShapeError("place: empty canvas");
  if (!patch.mask.same_size(patch.delta)) throw ShapeError("place: mask/delta size mismatch");
  const PlacedGeometry g = placed_geometry(patch.delta.height, patch.delta.width, placement, canvas_h, canvas_w);

  const Image scaled = resize_bilinear(patch.delta, g.out_h, g.out_w);
  const BinaryMask scaled_mask = resize_nearest(patch.mask, g.out_h, g.out_w);

  Placed out;
  out.geometry = g;
  out.delta = Image(canvas_h, canvas_w, 0.0);
  out.mask = BinaryMask(canvas_h, canvas_w, 0);
  for (std::size_t r = 0; r < g.out_h; ++r)
    for (std::size_t c = 0; c < g.out_w; ++c) {
      out.mask.at(g.row0 + r, g.col0 + c) = scaled_mask.at(r, c);
      for (std::size_t ch = 0; ch < Image::channels; ++ch)
        out.delta.at(g.row0 + r, g.col0 + c, ch) = scaled.at(r, c, ch);
    }
  return out;
}

/// x' = (1-m)⊙x + m⊙δ. With a binary mask this is a per-pixel select, which
/// keeps unmasked pixels bit-identical to the input. Output is clamped to
/// [0,1] (a no-op when both inputs already are).
inline Image stamp(const Image& x, const Image& placed_delta, const BinaryMask& placed_mask) {
  if (!x.same_size(placed_delta) || !placed_mask.same_size(x))
    throw ShapeError("stamp: operands must share spatial dimensions");
  Image out = x;
  for (std::size_t r = 0; r < x.height; ++r)
    for (std::size_t c = 0; c < x.width; ++c)
      if (placed_mask.at(r, c))
        for (std::size_t ch = 0; ch < Image::channels; ++ch)
          out.at(r, c, ch) = std::clamp(placed_delta.at(r, c, ch), 0.0, 1.0);
  return out;
}

/// Jacobian of stamp w.r.t. δ is diag(m): gradients pass only through masked
/// pixels. Accumulates m ⊙ grad_out into grad_delta.
inline void stamp_backward_to_delta(const Image& grad_stamped, const BinaryMask& placed_mask,
                                    Image& grad_placed_delta) {
  if (!placed_mask.same_size(grad_stamped) || !grad_placed_delta.same_size(grad_stamped))
    throw ShapeError("stamp_backward_to_delta: size mismatch");
  for (std::size_t r = 0; r < grad_stamped.height; ++r)
    for (std::size_t c = 0; c < grad_stamped.width; ++c)
      if (placed_mask.at(r, c))
        for (std::size_t ch = 0; ch < Image::channels; ++ch)
          grad_placed_delta.at(r, c, ch) += grad_stamped.at(r, c, ch);
}

/// Adjoint of place() for the delta path: crop the canvas gradient to the
/// footprint, then run the bilinear-resize adjoint back to patch resolution.
inline Image place_backward_to_patch(const Image& grad_canvas, const PlacedGeometry& g,
                                     std::size_t patch_h, std::size_t patch_w) {
  Image cropped(g.out_h, g.out_w, 0.0);
  for (std::size_t r = 0; r < g.out_h; ++r)
    for (std::size_t c = 0; c < g.out_w; ++c)
      for (std::size_t ch = 0; ch < Image::channels; ++ch)
        cropped.at(r, c, ch) = grad_canvas.at(g.row0 + r, g.col0 + c, ch);
  return resize_bilinear_adjoint(cropped, patch_h, patch_w);
}

/// Zeroes gradient entries where the patch-resolution mask is zero
/// (the background-removal product, with the mask held constant).
inline void apply_mask_to_grad(Image& grad, const BinaryMask& mask) {
  if (!mask.same_size(grad)) throw ShapeError("apply_mask_to_grad: size mismatch");
  for (std::size_t r = 0; r < grad.height; ++r)
    for (std::size_t c = 0; c < grad.width; ++c)
      if (mask.at(r, c) == 0)
        for (std::size_t ch = 0; ch < Image::channels; ++ch) grad.at(r, c, ch) = 0.0;
}

}  // namespace tnt::img
