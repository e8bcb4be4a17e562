#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "duplexmat/errors.hpp"

namespace duplexmat {

struct Rgb {
  float r = 0.f;
  float g = 0.f;
  float b = 0.f;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline float clamp01(float v) { return std::clamp(v, 0.f, 1.f); }

/// Row-major raster with interleaved channels, values nominally in [0,1].
///
/// Writers go through set() which clamps, or through data() for bulk
/// arithmetic followed by clamp_in_place(). Every producing operation in the
/// library hands out clamped rasters.
template <int Channels>
class Raster {
public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, float fill = 0.f) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw ConfigError("raster dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, clamp01(fill));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels;
  }
  float& operator()(int x, int y, int c = 0) { return data_[index(x, y) + c]; }
  float operator()(int x, int y, int c = 0) const { return data_[index(x, y) + c]; }

  void set(int x, int y, int c, float v) { data_[index(x, y) + c] = clamp01(v); }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <int Other>
  bool same_size(const Raster<Other>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  void clamp_in_place() {
    for (float& v : data_) v = clamp01(v);
  }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

using ImageRGB = Raster<3>;
using AlphaMatte = Raster<1>;

inline Rgb pixel(const ImageRGB& img, int x, int y) {
  const std::size_t i = img.index(x, y);
  auto d = img.data();
  return {d[i], d[i + 1], d[i + 2]};
}

inline void set_pixel(ImageRGB& img, int x, int y, Rgb c) {
  img.set(x, y, 0, c.r);
  img.set(x, y, 1, c.g);
  img.set(x, y, 2, c.b);
}

/// Paired color prediction and alpha matte for one frame.
struct RgbaForeground {
  ImageRGB color;
  AlphaMatte alpha;

  RgbaForeground() = default;
  RgbaForeground(int width, int height) : color(width, height), alpha(width, height) {}
  RgbaForeground(ImageRGB c, AlphaMatte a) : color(std::move(c)), alpha(std::move(a)) {
    if (!color.same_size(alpha)) {
      throw DimensionError("RGBA foreground: color and alpha dimensions differ");
    }
  }

  int width() const { return color.width(); }
  int height() const { return color.height(); }

  friend bool operator==(const RgbaForeground&, const RgbaForeground&) = default;
};

enum class TrimapLabel : std::uint8_t { Background = 0, Unknown = 128, Foreground = 255 };

class Trimap {
public:
  Trimap() = default;
  Trimap(int width, int height, TrimapLabel fill = TrimapLabel::Background)
      : width_(width), height_(height),
        labels_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  TrimapLabel& operator()(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  TrimapLabel operator()(int x, int y) const {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const TrimapLabel> labels() const { return labels_; }

  std::size_t count(TrimapLabel l) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<TrimapLabel> labels_;
};

template <int A, int B>
void require_same_size(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) +
                         "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                         "x" + std::to_string(b.height()) + ")");
  }
}

// Synthetic backgrounds.

ImageRGB make_solid(int width, int height, Rgb color);

/// Pixel (x,y) gets color_a iff floor(x/cell)+floor(y/cell) is even.
ImageRGB make_checkerboard(int width, int height, int cell, Rgb color_a, Rgb color_b);

/// Extracts the sub-rectangle [x0,x0+w) x [y0,y0+h). Must lie inside the source.
template <int C>
Raster<C> crop(const Raster<C>& src, int x0, int y0, int w, int h);

RgbaForeground crop(const RgbaForeground& src, int x0, int y0, int w, int h);

/// Area-average resampling to the requested size (box filter with fractional
/// coverage). Used for downscaling training crops.
template <int C>
Raster<C> resize_area(const Raster<C>& src, int width, int height);

/// Downscales color with alpha weighting (premultiplied average) and alpha
/// with a plain area average. Color where the averaged alpha is zero falls back
/// to the unweighted average.
RgbaForeground resize_area(const RgbaForeground& src, int width, int height);

template <int C>
Raster<C> flip_horizontal(const Raster<C>& src);

}  // namespace duplexmat
