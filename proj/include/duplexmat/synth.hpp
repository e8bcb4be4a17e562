#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "duplexmat/image.hpp"

namespace duplexmat {

using Rng = std::mt19937_64;

/// Deterministic per-index seed derivation (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

struct AugmentSpec {
  int max_displacement = 50;  ///< per vector, per axis, in source pixels
  std::vector<int> crop_sizes{320, 480, 640};
  int output_size = 320;
  int inner_border = 50;  ///< loss-free margin of the output patch
  double flip_probability = 0.5;
  double contrast_min = 0.9;
  double contrast_max = 1.1;
  double jitter_amplitude = 0.02;
  std::uint64_t seed = 0;

  /// Full-scale geometry scaled by output_size/320 (rounded): displacement,
  /// crop sizes and inner border.
  static AugmentSpec scaled_to(int output_size);
  /// Same geometry with photometric augmentation switched off.
  AugmentSpec without_photometric() const;
  void validate() const;
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Positions drawn for one sample: foreground at A on frame 1 and at
/// A + v_foreground on frame 2; cutout at B and B + v_cutout.
struct SampleGeometry {
  int crop_size = 0;
  Point a;
  Point b;
  Point v_foreground;
  Point v_cutout;
};

struct Photometric {
  bool flip = false;
  float contrast = 1.f;
  std::array<float, 3> jitter{0.f, 0.f, 0.f};
};

/// The crop-size views before downscaling. p_j = compose(gt_j, bg_j) exactly.
struct RawCrops {
  ImageRGB p1, p2;
  RgbaForeground gt1, gt2;
  ImageRGB bg1, bg2;
};

struct TrainSample {
  ImageRGB p1, p2;
  RgbaForeground gt1, gt2;
  int inner_border = 0;
  SampleGeometry geometry;
  Photometric photometric;
};

SampleGeometry sample_geometry(int fg_width, int fg_height, int bg_width, int bg_height,
                               const AugmentSpec& spec, Rng& rng);
RawCrops render_crops(const RgbaForeground& fg, const ImageRGB& bg1, const ImageRGB& bg2,
                      const SampleGeometry& g);
Photometric sample_photometric(const AugmentSpec& spec, Rng& rng);
/// Downscale to output_size then apply the photometric transform to inputs and
/// color ground truth (flip also to alpha).
TrainSample finalize_sample(const RawCrops& raw, const SampleGeometry& g, const Photometric& ph,
                            const AugmentSpec& spec);

TrainSample sample_pair(const RgbaForeground& fg, const ImageRGB& bg1, const ImageRGB& bg2,
                        const AugmentSpec& spec, Rng& rng);

// Dataset manifest.

struct ManifestRecord {
  std::string fg_path;
  std::string bg1_path;
  std::string bg2_path;
  std::string split;  ///< "train" or "val"
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

struct TupleCounts {
  std::size_t train = 0;
  std::size_t val = 0;
};

/// Tuple counts when every foreground is combined with `per_foreground`
/// background pairs and the tuples are split by `split`.
TupleCounts tuple_counts(std::size_t foregrounds, double split, std::size_t per_foreground = 100);

/// Splits foregrounds and consecutive background pairs (2i, 2i+1) disjointly
/// into train/val pools, then draws the requested number of combinations.
std::vector<ManifestRecord> build_manifest(const std::vector<std::string>& foregrounds,
                                           const std::vector<std::string>& background_sequence,
                                           double split, TupleCounts counts, std::uint64_t seed);

std::string manifest_to_jsonl(const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> manifest_from_jsonl(const std::string& text);

std::string sample_sidecar_json(const TrainSample& s, const ManifestRecord& rec);

// Procedural assets for self-contained runs.

/// Soft-edged blobs with an opaque core, a translucent veil and thin strands.
RgbaForeground make_procedural_foreground(int width, int height, Rng& rng);

/// Backing of the given nominal color with low-frequency shading and sensor
/// noise.
ImageRGB make_procedural_backing(int width, int height, Rgb nominal, Rng& rng,
                                 float shading = 0.08f, float noise = 0.01f);

}  // namespace duplexmat
