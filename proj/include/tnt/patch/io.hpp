#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "tnt/patch/image.hpp"

namespace tnt::img {

/// 8-bit interleaved raster, 3 (RGB) or 4 (RGBA) channels.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> bytes;
};

inline std::uint8_t quantize(double v) {
  const double x = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::llround(x));
}

inline double dequantize(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

namespace detail {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace detail

inline RawImage read_png(const std::string& path) {
  detail::PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw IoError("read_png: cannot open " + path);
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError("read_png: not a PNG file: " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw IoError("read_png: png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw IoError("read_png: png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("read_png: decode error in " + path);
  png_init_io(ctx.png, ctx.fp);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const png_byte color_type = png_get_color_type(ctx.png, ctx.info);
  const png_byte bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  if (bit_depth == 16) png_set_strip_16(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  RawImage out;
  out.height = png_get_image_height(ctx.png, ctx.info);
  out.width = png_get_image_width(ctx.png, ctx.info);
  out.channels = png_get_channels(ctx.png, ctx.info);
  if (out.channels != 3 && out.channels != 4)
    throw IoError("read_png: unsupported channel count in " + path);
  out.bytes.resize(out.height * out.width * out.channels);
  std::vector<png_bytep> rows(out.height);
  const std::size_t stride = out.width * out.channels;
  for (std::size_t r = 0; r < out.height; ++r) rows[r] = out.bytes.data() + r * stride;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);
  return out;
}

inline void write_png(const std::string& path, const RawImage& im) {
  if (im.channels != 3 && im.channels != 4) throw IoError("write_png: channels must be 3 or 4");
  if (im.bytes.size() != im.height * im.width * im.channels)
    throw IoError("write_png: buffer size mismatch");
  detail::PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw IoError("write_png: cannot open " + path + " for writing");
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw IoError("write_png: png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw IoError("write_png: png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("write_png: encode error for " + path);
  png_init_io(ctx.png, ctx.fp);
  const int color = im.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(im.width),
               static_cast<png_uint_32>(im.height), 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<png_bytep> rows(im.height);
  const std::size_t stride = im.width * im.channels;
  for (std::size_t r = 0; r < im.height; ++r)
    rows[r] = const_cast<png_bytep>(im.bytes.data() + r * stride);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

inline RawImage read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError("read_ppm: only binary P6 supported: " + path);
  std::size_t w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (maxval != 255) throw IoError("read_ppm: only 8-bit PPM supported: " + path);
  f.get();
  RawImage out;
  out.height = h;
  out.width = w;
  out.channels = 3;
  out.bytes.resize(h * w * 3);
  f.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(out.bytes.size()));
  if (!f) throw IoError("read_ppm: truncated file: " + path);
  return out;
}

/// Loads a raster file (.png or .ppm) as an RGB image in [0,1]; alpha, when
/// present, is dropped.
inline Image load_image(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  RawImage raw;
  if (ext == ".png" || ext == ".PNG")
    raw = read_png(path);
  else if (ext == ".ppm" || ext == ".PPM")
    raw = read_ppm(path);
  else
    throw IoError("load_image: unsupported extension '" + ext + "' for " + path);
  Image im(raw.height, raw.width);
  for (std::size_t r = 0; r < raw.height; ++r)
    for (std::size_t c = 0; c < raw.width; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        im.at(r, c, ch) = dequantize(raw.bytes[(r * raw.width + c) * raw.channels + ch]);
  return im;
}

inline void save_image(const std::string& path, const Image& im) {
  RawImage raw;
  raw.height = im.height;
  raw.width = im.width;
  raw.channels = 3;
  raw.bytes.resize(im.height * im.width * 3);
  for (std::size_t i = 0; i < im.pixels.size(); ++i) raw.bytes[i] = quantize(im.pixels[i]);
  write_png(path, raw);
}

/// Patch interchange format: RGBA PNG with RGB = delta and alpha = mask*255.
inline void save_patch(const std::string& path, const Patch& patch) {
  if (!patch.mask.same_size(patch.delta)) throw ShapeError("save_patch: mask/delta size mismatch");
  RawImage raw;
  raw.height = patch.delta.height;
  raw.width = patch.delta.width;
  raw.channels = 4;
  raw.bytes.resize(raw.height * raw.width * 4);
  for (std::size_t r = 0; r < raw.height; ++r)
    for (std::size_t c = 0; c < raw.width; ++c) {
      auto* px = raw.bytes.data() + (r * raw.width + c) * 4;
      px[0] = quantize(patch.delta.at(r, c, 0));
      px[1] = quantize(patch.delta.at(r, c, 1));
      px[2] = quantize(patch.delta.at(r, c, 2));
      px[3] = patch.mask.at(r, c) ? 255 : 0;
    }
  write_png(path, raw);
}

inline Patch load_patch(const std::string& path) {
  const RawImage raw = read_png(path);
  if (raw.channels != 4) throw IoError("load_patch: patch file must be RGBA: " + path);
  Patch patch;
  patch.source = PatchSource::external_file;
  patch.delta = Image(raw.height, raw.width);
  patch.mask = BinaryMask(raw.height, raw.width);
  for (std::size_t r = 0; r < raw.height; ++r)
    for (std::size_t c = 0; c < raw.width; ++c) {
      const auto* px = raw.bytes.data() + (r * raw.width + c) * 4;
      patch.delta.at(r, c, 0) = dequantize(px[0]);
      patch.delta.at(r, c, 1) = dequantize(px[1]);
      patch.delta.at(r, c, 2) = dequantize(px[2]);
      patch.mask.at(r, c) = px[3] >= 128 ? 1 : 0;
    }
  return patch;
}

}  // namespace tnt::img
