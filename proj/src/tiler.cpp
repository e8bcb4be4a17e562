#include "duplexmat/tiler.hpp"

#include <cmath>
#include <string>

#include "duplexmat/parallel.hpp"

namespace duplexmat {

TileParams TileParams::scaled_to(int patch_size) {
  TileParams p;
  const double s = patch_size / 320.0;
  const int border = static_cast<int>(std::lround(50 * s));
  p.patch_size = patch_size;
  p.inner_size = patch_size - 2 * border;
  p.inner_overlap = static_cast<int>(std::lround(50 * s));
  return p;
}

void TileParams::validate() const {
  if (patch_size <= 0) throw ConfigError("tiles: patch_size must be > 0");
  if (inner_size <= 0 || inner_size > patch_size) throw ConfigError("tiles: 0 < inner_size <= patch_size violated");
  if ((patch_size - inner_size) % 2 != 0) throw ConfigError("tiles: patch_size - inner_size must be even (centered inner region)");
  if (inner_overlap < 0 || inner_overlap >= inner_size) throw ConfigError("tiles: 0 <= inner_overlap < inner_size violated");
}

namespace {

std::vector<AxisTile> plan_axis(int length, const TileParams& p) {
  const int stride = p.stride();
  const int n = length == p.patch_size
                    ? 1
                    : static_cast<int>((length - p.patch_size + stride - 1) / stride) + 1;
  std::vector<AxisTile> tiles(n);
  for (int i = 0; i < n; ++i) {
    AxisTile& t = tiles[i];
    t.origin = std::min(i * stride, length - p.patch_size);
    t.support_begin = i == 0 ? 0 : t.origin + p.border();
    t.support_end = i == n - 1 ? length : t.origin + p.border() + p.inner_size;
  }
  // Raw trapezoids: linear ramps across the overlap with each neighbour.
  std::vector<std::vector<double>> raw(n);
  for (int i = 0; i < n; ++i) {
    AxisTile& t = tiles[i];
    const int len = t.support_end - t.support_begin;
    raw[i].assign(len, 1.0);
    if (i > 0) {
      const int ramp = tiles[i - 1].support_end - t.support_begin;
      for (int k = 0; k < std::min(ramp, len); ++k) raw[i][k] = std::min(raw[i][k], (k + 0.5) / ramp);
    }
    if (i < n - 1) {
      const int ramp = t.support_end - tiles[i + 1].support_begin;
      for (int k = 0; k < std::min(ramp, len); ++k) {
        double& w = raw[i][len - 1 - k];
        w = std::min(w, (k + 0.5) / ramp);
      }
    }
  }
  // Normalize per coordinate so the weights form a partition of unity even
  // where clamped edge tiles produce triple overlaps.
  std::vector<double> total(length, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < static_cast<int>(raw[i].size()); ++k) total[tiles[i].support_begin + k] += raw[i][k];
  for (int i = 0; i < n; ++i) {
    tiles[i].weights.resize(raw[i].size());
    for (std::size_t k = 0; k < raw[i].size(); ++k)
      tiles[i].weights[k] = static_cast<float>(raw[i][k] / total[tiles[i].support_begin + k]);
  }
  return tiles;
}

float axis_weight(const AxisTile& t, int coord) {
  if (coord < t.support_begin || coord >= t.support_end) return 0.f;
  return t.weights[coord - t.support_begin];
}

}  // namespace

std::pair<int, int> TileLayout::origin(std::size_t tile) const {
  const std::size_t c = tile % columns.size();
  const std::size_t r = tile / columns.size();
  return {columns[c].origin, rows[r].origin};
}

float TileLayout::weight(std::size_t tile, int x, int y) const {
  const std::size_t c = tile % columns.size();
  const std::size_t r = tile / columns.size();
  return axis_weight(columns[c], x) * axis_weight(rows[r], y);
}

TileLayout plan_tiles(int width, int height, const TileParams& params) {
  params.validate();
  if (width < params.patch_size || height < params.patch_size) {
    throw ConfigError("tiles: frame " + std::to_string(width) + "x" + std::to_string(height) +
                      " smaller than patch " + std::to_string(params.patch_size));
  }
  TileLayout layout;
  layout.params = params;
  layout.width = width;
  layout.height = height;
  layout.columns = plan_axis(width, params);
  layout.rows = plan_axis(height, params);
  return layout;
}

RgbaForeground blend_fuse(const std::vector<RgbaForeground>& preds, const TileLayout& layout) {
  if (preds.size() != layout.tile_count()) {
    throw ConfigError("blend_fuse: expected " + std::to_string(layout.tile_count()) +
                      " tile predictions, got " + std::to_string(preds.size()));
  }
  const int ps = layout.params.patch_size;
  std::vector<double> acc(static_cast<std::size_t>(layout.width) * layout.height * 4, 0.0);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const RgbaForeground& p = preds[t];
    if (p.width() != ps || p.height() != ps) {
      throw DimensionError("blend_fuse: tile " + std::to_string(t) + " is not patch-sized");
    }
    const AxisTile& col = layout.columns[t % layout.columns.size()];
    const AxisTile& row = layout.rows[t / layout.columns.size()];
    for (int y = row.support_begin; y < row.support_end; ++y) {
      const float wy = row.weights[y - row.support_begin];
      const int py = y - row.origin;
      for (int x = col.support_begin; x < col.support_end; ++x) {
        const double w = static_cast<double>(wy) * col.weights[x - col.support_begin];
        const int px = x - col.origin;
        double* a = &acc[(static_cast<std::size_t>(y) * layout.width + x) * 4];
        a[0] += w * p.color(px, py, 0);
        a[1] += w * p.color(px, py, 1);
        a[2] += w * p.color(px, py, 2);
        a[3] += w * p.alpha(px, py);
      }
    }
  }
  RgbaForeground out(layout.width, layout.height);
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x) {
      const double* a = &acc[(static_cast<std::size_t>(y) * layout.width + x) * 4];
      for (int c = 0; c < 3; ++c) out.color.set(x, y, c, static_cast<float>(a[c]));
      out.alpha.set(x, y, 0, static_cast<float>(a[3]));
    }
  return out;
}

std::pair<RgbaForeground, RgbaForeground> infer_frame_pair(const PairPredictor& predictor,
                                                           const ImageRGB& f1, const ImageRGB& f2,
                                                           const TileParams& params, int threads) {
  require_same_size(f1, f2, "infer_frame_pair");
  const TileLayout layout = plan_tiles(f1.width(), f1.height(), params);
  const int ps = params.patch_size;
  std::vector<RgbaForeground> out1(layout.tile_count()), out2(layout.tile_count());
  parallel_for(layout.tile_count(), threads, [&](std::size_t t) {
    const auto [ox, oy] = layout.origin(t);
    auto [a, b] = predictor(crop(f1, ox, oy, ps, ps), crop(f2, ox, oy, ps, ps));
    if (a.width() != ps || a.height() != ps || b.width() != ps || b.height() != ps) {
      throw DimensionError("infer_frame_pair: predictor output does not match patch size " +
                           std::to_string(ps));
    }
    out1[t] = std::move(a);
    out2[t] = std::move(b);
  });
  return {blend_fuse(out1, layout), blend_fuse(out2, layout)};
}

}  // namespace duplexmat
