#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"
#include "tnt/patch/image.hpp"
#include "tnt/patch/io.hpp"
#include "tnt/patch/ops.hpp"
#include "tnt/patch/resize.hpp"

using namespace tnt;
using namespace tnt::img;

namespace {

Image uniform_image(std::size_t h, std::size_t w, double v) { return Image(h, w, v); }

Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  Image im(h, w);
  for (auto& v : im.pixels) v = rng.uniform();
  return im;
}

BinaryMask random_mask(std::size_t h, std::size_t w, Rng& rng, double p_one = 0.5) {
  BinaryMask m(h, w);
  for (auto& b : m.bits) b = rng.uniform() < p_one ? 1 : 0;
  return m;
}

}  // namespace

TEST(ComputeMask, UniformWhiteIsAllOnes) {
  const auto mask = compute_mask(uniform_image(4, 4, 1.0), {ThresholdMode::fixed, 0.1});
  EXPECT_EQ(mask.count_ones(), 16u);
}

TEST(ComputeMask, UniformBlackThrowsEmptyPatch) {
  EXPECT_THROW(compute_mask(uniform_image(4, 4, 0.0), {ThresholdMode::fixed, 0.1}), EmptyPatch);
}

TEST(ComputeMask, HalfBrightHalfDark) {
  Image im(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) im.at(r, c, ch) = c < 2 ? 0.8 : 0.05;
  const auto mask = compute_mask(im, {ThresholdMode::fixed, 0.1});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(mask.at(r, c), c < 2 ? 1 : 0);
}

TEST(ComputeMask, OutputIsBinary) {
  Rng rng(7);
  for (int it = 0; it < 20; ++it) {
    Image im = random_image(6, 5, rng);
    try {
      const auto mask = compute_mask(im, {ThresholdMode::fixed, 0.5});
      for (auto b : mask.bits) EXPECT_TRUE(b == 0 || b == 1);
    } catch (const EmptyPatch&) {
    }
  }
}

TEST(ComputeMask, OtsuSeparatesBimodalImage) {
  Image im(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) im.at(r, c, ch) = r < 2 ? 0.9 : 0.1;
  const auto mask = compute_mask(im, {ThresholdMode::otsu, 0.0});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(mask.at(r, c), r < 2 ? 1 : 0);
}

TEST(RemoveBackground, IdentityMaskLeavesDeltaUnchanged) {
  Patch p{uniform_image(3, 3, 0.7), BinaryMask(3, 3, 1), PatchSource::generator_sample};
  const Patch out = remove_background(p);
  EXPECT_EQ(out.delta.pixels, p.delta.pixels);
}

TEST(RemoveBackground, CheckerboardMask) {
  Patch p{uniform_image(4, 4, 0.5), BinaryMask(4, 4), PatchSource::generator_sample};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) p.mask.at(r, c) = (r + c) % 2;
  const Patch out = remove_background(p);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch)
        EXPECT_DOUBLE_EQ(out.delta.at(r, c, ch), (r + c) % 2 ? 0.5 : 0.0);
}

TEST(RemoveBackground, Idempotent) {
  Rng rng(3);
  Patch p{random_image(5, 5, rng), random_mask(5, 5, rng), PatchSource::generator_sample};
  const Patch once = remove_background(p);
  const Patch twice = remove_background(once);
  EXPECT_EQ(once.delta.pixels, twice.delta.pixels);
  // post-invariant: delta ⊙ (1-mask) = 0
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c)
      if (!once.mask.at(r, c)) {
        for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(once.delta.at(r, c, ch), 0.0);
      }
}

TEST(Place, LowerRightCornerPreservingSize) {
  Patch p{uniform_image(2, 2, 1.0), BinaryMask(2, 2, 1), PatchSource::generator_sample};
  const auto placed = place(p, {Location::lower_right, 4.0 / 16.0, 0, 0}, 4, 4);
  EXPECT_EQ(placed.geometry.out_h, 2u);
  EXPECT_EQ(placed.geometry.out_w, 2u);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const bool inside = r >= 2 && c >= 2;
      EXPECT_EQ(placed.mask.at(r, c), inside ? 1 : 0);
      EXPECT_EQ(placed.delta.at(r, c, 0), inside ? 1.0 : 0.0);
    }
}

TEST(Place, CenterOffsetIsFloorHalf) {
  Patch p{uniform_image(2, 2, 1.0), BinaryMask(2, 2, 1), PatchSource::generator_sample};
  const auto placed = place(p, {Location::center, 4.0 / 16.0, 0, 0}, 4, 4);
  EXPECT_EQ(placed.geometry.row0, 1u);
  EXPECT_EQ(placed.geometry.col0, 1u);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_EQ(placed.mask.at(r, c), (r >= 1 && r <= 2 && c >= 1 && c <= 2) ? 1 : 0);
}

TEST(Place, FullScaleCoversWholeCanvas) {
  Patch p{uniform_image(8, 8, 0.4), BinaryMask(8, 8, 1), PatchSource::generator_sample};
  const auto placed = place(p, {Location::center, 1.0, 0, 0}, 8, 8);
  EXPECT_EQ(placed.mask.count_ones(), 64u);
}

TEST(Place, CustomOffsetOverflowThrows) {
  Patch p{uniform_image(4, 4, 1.0), BinaryMask(4, 4, 1), PatchSource::generator_sample};
  Placement pl{Location::custom, 16.0 / 64.0, 6, 6};
  EXPECT_THROW(place(p, pl, 8, 8), PlacementOverflow);
}

TEST(Place, OversizedAspectThrows) {
  Patch p{uniform_image(1, 64, 1.0), BinaryMask(1, 64, 1), PatchSource::generator_sample};
  EXPECT_THROW(place(p, {Location::center, 1.0, 0, 0}, 8, 8), PlacementOverflow);
}

TEST(Stamp, AllZeroMaskIsIdentity) {
  Rng rng(11);
  const Image x = random_image(6, 6, rng);
  const Image d = random_image(6, 6, rng);
  const Image out = stamp(x, d, BinaryMask(6, 6, 0));
  EXPECT_EQ(out.pixels, x.pixels);
}

TEST(Stamp, AllOnesMaskIsDelta) {
  Rng rng(12);
  const Image x = random_image(6, 6, rng);
  const Image d = random_image(6, 6, rng);
  const Image out = stamp(x, d, BinaryMask(6, 6, 1));
  EXPECT_EQ(out.pixels, d.pixels);
}

TEST(Stamp, QuadrantExample) {
  const Image x = uniform_image(4, 4, 0.5);
  const Image d = uniform_image(4, 4, 1.0);
  BinaryMask m(4, 4, 0);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) m.at(r, c) = 1;
  const Image out = stamp(x, d, m);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_DOUBLE_EQ(out.at(r, c, 0), (r < 2 && c < 2) ? 1.0 : 0.5);
}

TEST(Stamp, ShapeMismatchThrows) {
  EXPECT_THROW(stamp(uniform_image(4, 4, 0.5), uniform_image(3, 4, 0.5), BinaryMask(4, 4, 1)),
               ShapeError);
}

TEST(Stamp, IdempotenceAndLocalityRandomized) {
  Rng rng(99);
  for (int it = 0; it < 200; ++it) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 9));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 9));
    const Image x = random_image(h, w, rng);
    const Image d = random_image(h, w, rng);
    const BinaryMask m = random_mask(h, w, rng);
    const Image once = stamp(x, d, m);
    const Image twice = stamp(once, d, m);
    EXPECT_EQ(once.pixels, twice.pixels);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        if (!m.at(r, c)) {
          for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(once.at(r, c, ch), x.at(r, c, ch));
        }
  }
}

// With the mask fixed, stamp is linear in delta and its Jacobian is diag(m).
TEST(Stamp, JacobianMatchesFiniteDifferences) {
  Rng rng(5);
  const std::size_t h = 5, w = 4;
  const Image x = random_image(h, w, rng);
  Image d = random_image(h, w, rng);
  const BinaryMask m = random_mask(h, w, rng);
  const double eps = 1e-6;
  for (int trial = 0; trial < 40; ++trial) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(d.numel()) - 1));
    // scale pixel into the interior so +/- eps stays in range
    d.pixels[idx] = 0.25 + 0.5 * d.pixels[idx];
    const double orig = d.pixels[idx];
    d.pixels[idx] = orig + eps;
    const Image up = stamp(x, d, m);
    d.pixels[idx] = orig - eps;
    const Image dn = stamp(x, d, m);
    d.pixels[idx] = orig;
    const double fd = (up.pixels[idx] - dn.pixels[idx]) / (2 * eps);
    const double analytic = m.bits[idx / 3] ? 1.0 : 0.0;
    EXPECT_NEAR(fd, analytic, 1e-6);
    // off-diagonal entries are exactly zero
    const std::size_t other = (idx + 3) % d.numel();
    d.pixels[idx] = orig + eps;
    const Image up2 = stamp(x, d, m);
    d.pixels[idx] = orig;
    EXPECT_EQ(up2.pixels[other], stamp(x, d, m).pixels[other]);
  }
}

TEST(Resize, BilinearAdjointIdentity) {
  Rng rng(21);
  const Image x = random_image(7, 5, rng);
  Image y(11, 9);
  for (auto& v : y.pixels) v = rng.uniform(-1.0, 1.0);
  const Image ax = resize_bilinear(x, 11, 9);
  const Image aty = resize_bilinear_adjoint(y, 7, 5);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < ax.pixels.size(); ++i) lhs += ax.pixels[i] * y.pixels[i];
  for (std::size_t i = 0; i < x.pixels.size(); ++i) rhs += x.pixels[i] * aty.pixels[i];
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST(Resize, IdentityWhenSameSize) {
  Rng rng(22);
  const Image x = random_image(6, 6, rng);
  const Image y = resize_bilinear(x, 6, 6);
  for (std::size_t i = 0; i < x.pixels.size(); ++i) EXPECT_NEAR(y.pixels[i], x.pixels[i], 1e-15);
}

TEST(PatchIo, RgbaRoundTripPreservesBytes) {
  Rng rng(31);
  Patch p{random_image(9, 7, rng), random_mask(9, 7, rng), PatchSource::generator_sample};
  // quantize to the 8-bit grid so the round trip is exact
  for (auto& v : p.delta.pixels) v = dequantize(quantize(v));
  const auto dir = std::filesystem::temp_directory_path() / "tnt_patch_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "patch.png").string();
  save_patch(path, p);
  const Patch q = load_patch(path);
  EXPECT_EQ(q.delta.pixels, p.delta.pixels);
  EXPECT_EQ(q.mask.bits, p.mask.bits);
  EXPECT_EQ(q.source, PatchSource::external_file);
}

TEST(PatchIo, QuantizeDequantizeExactOnGrid) {
  for (int b = 0; b < 256; ++b)
    EXPECT_EQ(quantize(dequantize(static_cast<std::uint8_t>(b))), b);
}
