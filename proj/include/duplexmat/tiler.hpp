#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "duplexmat/image.hpp"

namespace duplexmat {

struct TileParams {
  int patch_size = 320;
  int inner_size = 220;
  int inner_overlap = 50;

  int border() const { return (patch_size - inner_size) / 2; }
  int stride() const { return inner_size - inner_overlap; }

  /// Full-scale geometry scaled by patch_size/320 (rounded), keeping the
  /// border and inner overlap proportional.
  static TileParams scaled_to(int patch_size);
  void validate() const;
};

/// 1D blend profile of one tile along one axis. weights[i] applies to frame
/// coordinate support_begin + i.
struct AxisTile {
  int origin = 0;
  int support_begin = 0;
  int support_end = 0;
  std::vector<float> weights;
};

/// Overlap-blend decomposition of a frame. Tile (col,row) is the separable
/// product of columns[col] and rows[row]; tiles are ordered row-major.
struct TileLayout {
  TileParams params;
  int width = 0;
  int height = 0;
  std::vector<AxisTile> columns;
  std::vector<AxisTile> rows;

  std::size_t tile_count() const { return columns.size() * rows.size(); }
  int tiles_across() const { return static_cast<int>(columns.size()); }
  int tiles_down() const { return static_cast<int>(rows.size()); }
  std::pair<int, int> origin(std::size_t tile) const;
  /// Blend weight of `tile` at frame pixel (x,y); 0 outside its support.
  float weight(std::size_t tile, int x, int y) const;
};

/// Origins at multiples of the stride, last tile clamped to the frame edge.
/// Each tile's support is its inner region, extended to the frame edge for
/// edge tiles; weights ramp linearly across overlaps and are normalized so
/// they sum to one at every pixel.
TileLayout plan_tiles(int width, int height, const TileParams& params);

/// Weighted fusion of per-tile predictions. Each prediction is patch-sized
/// (the tile's full window); only its support contributes.
RgbaForeground blend_fuse(const std::vector<RgbaForeground>& tile_predictions,
                          const TileLayout& layout);

/// Anything that maps a registered patch pair to one RGBA estimate per frame.
using PairPredictor = std::function<std::pair<RgbaForeground, RgbaForeground>(
    const ImageRGB& p1, const ImageRGB& p2)>;

/// Tiles both frames with one layout, runs the predictor on every (p1,p2) and
/// fuses decoder-1 outputs into frame 1 and decoder-2 outputs into frame 2.
/// `threads` > 1 evaluates tiles concurrently; fusion order is fixed.
std::pair<RgbaForeground, RgbaForeground> infer_frame_pair(const PairPredictor& predictor,
                                                           const ImageRGB& f1, const ImageRGB& f2,
                                                           const TileParams& params,
                                                           int threads = 1);

}  // namespace duplexmat
