#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tnt/patch/image.hpp"

namespace tnt::img {

namespace detail {

struct Taps {
  std::size_t i0, i1;
  double w0, w1;
};

/// Source taps for one output coordinate, half-pixel-center convention,
/// borders replicated.
inline Taps bilinear_taps(std::size_t out_i, std::size_t out_n, std::size_t in_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
  const auto i0 = static_cast<std::size_t>(std::floor(src));
  const std::size_t i1 = std::min(i0 + 1, in_n - 1);
  const double w1 = src - static_cast<double>(i0);
  return {i0, i1, 1.0 - w1, w1};
}

inline std::size_t nearest_tap(std::size_t out_i, std::size_t out_n, std::size_t in_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
  return static_cast<std::size_t>(std::llround(src));
}

}  // namespace detail

inline Image resize_bilinear(const Image& in, std::size_t out_h, std::size_t out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize: output dims must be >= 1");
  Image out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto ty = detail::bilinear_taps(r, out_h, in.height);
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto tx = detail::bilinear_taps(c, out_w, in.width);
      for (std::size_t ch = 0; ch < Image::channels; ++ch) {
        out.at(r, c, ch) = ty.w0 * (tx.w0 * in.at(ty.i0, tx.i0, ch) + tx.w1 * in.at(ty.i0, tx.i1, ch)) +
                           ty.w1 * (tx.w0 * in.at(ty.i1, tx.i0, ch) + tx.w1 * in.at(ty.i1, tx.i1, ch));
      }
    }
  }
  return out;
}

/// Adjoint of resize_bilinear: scatters an (out_h, out_w) gradient back onto
/// the (in_h, in_w) grid with the same taps, so <A x, y> == <x, A^T y>.
inline Image resize_bilinear_adjoint(const Image& grad_out, std::size_t in_h, std::size_t in_w) {
  Image grad_in(in_h, in_w, 0.0);
  for (std::size_t r = 0; r < grad_out.height; ++r) {
    const auto ty = detail::bilinear_taps(r, grad_out.height, in_h);
    for (std::size_t c = 0; c < grad_out.width; ++c) {
      const auto tx = detail::bilinear_taps(c, grad_out.width, in_w);
      for (std::size_t ch = 0; ch < Image::channels; ++ch) {
        const double g = grad_out.at(r, c, ch);
        grad_in.at(ty.i0, tx.i0, ch) += ty.w0 * tx.w0 * g;
        grad_in.at(ty.i0, tx.i1, ch) += ty.w0 * tx.w1 * g;
        grad_in.at(ty.i1, tx.i0, ch) += ty.w1 * tx.w0 * g;
        grad_in.at(ty.i1, tx.i1, ch) += ty.w1 * tx.w1 * g;
      }
    }
  }
  return grad_in;
}

/// Nearest-neighbor mask resize; output stays strictly {0,1}.
inline BinaryMask resize_nearest(const BinaryMask& in, std::size_t out_h, std::size_t out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize: output dims must be >= 1");
  BinaryMask out(out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const std::size_t sr = detail::nearest_tap(r, out_h, in.height);
    for (std::size_t c = 0; c < out_w; ++c) {
      const std::size_t sc = detail::nearest_tap(c, out_w, in.width);
      out.at(r, c) = in.at(sr, sc) >= 1 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace tnt::img
