#include <gtest/gtest.h>

#include <random>

#include "duplexmat/compositor.hpp"
#include "duplexmat/tiler.hpp"
#include "duplexmat/triangulate.hpp"

using namespace duplexmat;

namespace {

double weight_sum(const TileLayout& l, int x, int y) {
  double s = 0.0;
  for (std::size_t t = 0; t < l.tile_count(); ++t) s += l.weight(t, x, y);
  return s;
}

std::vector<RgbaForeground> constant_tiles(const TileLayout& l, const std::vector<float>& values) {
  std::vector<RgbaForeground> out;
  for (std::size_t t = 0; t < l.tile_count(); ++t) {
    const float v = values[t % values.size()];
    out.emplace_back(ImageRGB(l.params.patch_size, l.params.patch_size, v),
                     AlphaMatte(l.params.patch_size, l.params.patch_size, v));
  }
  return out;
}

RgbaForeground random_fg(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  RgbaForeground fg(w, h);
  for (float& v : fg.color.data()) v = u(rng);
  for (float& v : fg.alpha.data()) v = u(rng);
  return fg;
}

}  // namespace

TEST(TileParams, FullScaleGeometry) {
  const TileParams p;
  EXPECT_EQ(p.border(), 50);
  EXPECT_EQ(p.stride(), 170);
  const TileParams toy = TileParams::scaled_to(64);
  EXPECT_EQ(toy.border(), 10);
  EXPECT_EQ(toy.inner_size, 44);
  EXPECT_EQ(toy.inner_overlap, 10);
}

TEST(PlanTiles, FullResolution) {
  const TileLayout l = plan_tiles(2448, 1600, TileParams{});
  EXPECT_EQ(l.tiles_across(), 14);
  EXPECT_EQ(l.tiles_down(), 9);
  EXPECT_EQ(l.tile_count(), 126u);
  EXPECT_EQ(l.columns.back().origin, 2448 - 320);
  EXPECT_EQ(l.rows.back().origin, 1600 - 320);
}

TEST(PlanTiles, SinglePatchFrame) {
  const TileLayout l = plan_tiles(320, 320, TileParams{});
  ASSERT_EQ(l.tile_count(), 1u);
  for (int y = 0; y < 320; y += 7)
    for (int x = 0; x < 320; x += 7) EXPECT_EQ(l.weight(0, x, y), 1.f);
}

TEST(PlanTiles, RejectsSmallFrames) {
  EXPECT_THROW(plan_tiles(319, 400, TileParams{}), ConfigError);
}

TEST(PlanTiles, PartitionOfUnity) {
  std::mt19937_64 rng(12);
  const TileParams p = TileParams::scaled_to(64);
  std::uniform_int_distribution<int> dim(64, 300);
  for (int trial = 0; trial < 20; ++trial) {
    const TileLayout l = plan_tiles(dim(rng), dim(rng), p);
    for (int y = 0; y < l.height; ++y)
      for (int x = 0; x < l.width; ++x) ASSERT_NEAR(weight_sum(l, x, y), 1.0, 1e-6) << x << "," << y;
  }
}

TEST(PlanTiles, WeightsOnlyInsideTile) {
  const TileLayout l = plan_tiles(200, 150, TileParams::scaled_to(64));
  for (std::size_t t = 0; t < l.tile_count(); ++t) {
    const auto [ox, oy] = l.origin(t);
    for (int y = 0; y < l.height; ++y)
      for (int x = 0; x < l.width; ++x)
        if (l.weight(t, x, y) > 0.f) {
          ASSERT_GE(x, ox);
          ASSERT_LT(x, ox + 64);
          ASSERT_GE(y, oy);
          ASSERT_LT(y, oy + 64);
        }
  }
}

TEST(BlendFuse, IdentityOracle) {
  const TileParams p = TileParams::scaled_to(64);
  const RgbaForeground gt = random_fg(170, 120, 3);
  const TileLayout l = plan_tiles(gt.width(), gt.height(), p);
  std::vector<RgbaForeground> tiles;
  for (std::size_t t = 0; t < l.tile_count(); ++t) {
    const auto [ox, oy] = l.origin(t);
    tiles.push_back(crop(gt, ox, oy, 64, 64));
  }
  const RgbaForeground fused = blend_fuse(tiles, l);
  for (std::size_t i = 0; i < gt.color.data().size(); ++i)
    ASSERT_NEAR(fused.color.data()[i], gt.color.data()[i], 1e-6);
  for (std::size_t i = 0; i < gt.alpha.data().size(); ++i)
    ASSERT_NEAR(fused.alpha.data()[i], gt.alpha.data()[i], 1e-6);
}

TEST(BlendFuse, ConstantTiles) {
  const TileLayout l = plan_tiles(150, 100, TileParams::scaled_to(64));
  const RgbaForeground fused = blend_fuse(constant_tiles(l, {0.3f}), l);
  for (float v : fused.alpha.data()) ASSERT_NEAR(v, 0.3f, 1e-6);
}

TEST(BlendFuse, OverlapMidpoint) {
  // Two tiles across: the overlap band of the inner regions is symmetric
  // about its centre, so the central pair of pixels averages to (a+b)/2.
  TileParams p{64, 44, 10};
  const TileLayout l = plan_tiles(64 + 34, 64, p);
  ASSERT_EQ(l.tiles_across(), 2);
  const RgbaForeground fused = blend_fuse(constant_tiles(l, {0.2f, 0.8f}), l);
  const int band_begin = l.columns[1].origin + p.border();
  const int band_end = l.columns[0].origin + p.border() + p.inner_size;
  ASSERT_EQ(band_end - band_begin, 10);
  const int mid = (band_begin + band_end) / 2;
  const float centre = 0.5f * (fused.alpha(mid - 1, 30) + fused.alpha(mid, 30));
  EXPECT_NEAR(centre, 0.5f, 1e-6);
  EXPECT_NEAR(fused.alpha(band_begin - 1, 30), 0.2f, 1e-6);
  EXPECT_NEAR(fused.alpha(band_end, 30), 0.8f, 1e-6);
}

TEST(BlendFuse, Linear) {
  const TileLayout l = plan_tiles(130, 90, TileParams::scaled_to(64));
  std::vector<RgbaForeground> a, b, sum;
  for (std::size_t t = 0; t < l.tile_count(); ++t) {
    a.push_back(random_fg(64, 64, 100 + t));
    b.push_back(random_fg(64, 64, 200 + t));
    for (float& v : a.back().alpha.data()) v *= 0.5f;
    for (float& v : b.back().alpha.data()) v *= 0.5f;
    RgbaForeground s = a.back();
    for (std::size_t i = 0; i < s.alpha.data().size(); ++i) s.alpha.data()[i] += b.back().alpha.data()[i];
    sum.push_back(s);
  }
  const RgbaForeground fa = blend_fuse(a, l), fb = blend_fuse(b, l), fs = blend_fuse(sum, l);
  for (std::size_t i = 0; i < fs.alpha.data().size(); ++i)
    ASSERT_NEAR(fs.alpha.data()[i], fa.alpha.data()[i] + fb.alpha.data()[i], 1e-6);
}

TEST(BlendFuse, MissingTile) {
  const TileLayout l = plan_tiles(150, 100, TileParams::scaled_to(64));
  auto tiles = constant_tiles(l, {0.5f});
  tiles.pop_back();
  EXPECT_THROW(blend_fuse(tiles, l), ConfigError);
}

TEST(InferFramePair, TriangulationOracleMatchesWholeFrame) {
  const RgbaForeground fg = random_fg(150, 110, 7);
  const Rgb green{0.1f, 0.9f, 0.2f}, purple{0.7f, 0.1f, 0.8f};
  const ImageRGB f1 = compose(fg, make_solid(150, 110, green));
  const ImageRGB f2 = compose(fg, make_solid(150, 110, purple));
  const PairPredictor oracle = [&](const ImageRGB& p1, const ImageRGB& p2) {
    const RgbaForeground m = triangulate_frame(p1, p2, green, purple);
    return std::make_pair(m, m);
  };
  const auto whole = triangulate_frame(f1, f2, green, purple);
  for (int threads : {1, 3}) {
    const auto [o1, o2] = infer_frame_pair(oracle, f1, f2, TileParams::scaled_to(64), threads);
    for (std::size_t i = 0; i < whole.alpha.data().size(); ++i) {
      ASSERT_NEAR(o1.alpha.data()[i], whole.alpha.data()[i], 1e-6);
      ASSERT_NEAR(o2.alpha.data()[i], whole.alpha.data()[i], 1e-6);
    }
  }
}

TEST(InferFramePair, SingleTileEqualsForward) {
  const RgbaForeground fg = random_fg(64, 64, 9);
  const PairPredictor echo = [&](const ImageRGB&, const ImageRGB&) { return std::make_pair(fg, fg); };
  const auto [o1, o2] = infer_frame_pair(echo, fg.color, fg.color, TileParams::scaled_to(64));
  EXPECT_EQ(o1, fg);
  EXPECT_EQ(o2, fg);
}

TEST(InferFramePair, Deterministic) {
  const RgbaForeground fg = random_fg(140, 100, 10);
  const PairPredictor pred = [](const ImageRGB& p1, const ImageRGB& p2) {
    RgbaForeground a(p1, AlphaMatte(p1.width(), p1.height(), 0.5f));
    RgbaForeground b(p2, AlphaMatte(p2.width(), p2.height(), 0.25f));
    return std::make_pair(a, b);
  };
  const auto r1 = infer_frame_pair(pred, fg.color, fg.color, TileParams::scaled_to(64), 2);
  const auto r2 = infer_frame_pair(pred, fg.color, fg.color, TileParams::scaled_to(64), 1);
  EXPECT_EQ(r1.first, r2.first);
  EXPECT_EQ(r1.second, r2.second);
}

TEST(InferFramePair, PatchSizeMismatch) {
  const ImageRGB f(100, 100);
  const PairPredictor wrong = [](const ImageRGB&, const ImageRGB&) {
    return std::make_pair(RgbaForeground(32, 32), RgbaForeground(32, 32));
  };
  EXPECT_THROW(infer_frame_pair(wrong, f, f, TileParams::scaled_to(64)), DimensionError);
}
