#include "duplexmat/triangulate.hpp"

#include <algorithm>
#include <string>

namespace duplexmat {

namespace {

class DegenerateBacking : public NumericError {
public:
  using NumericError::NumericError;
};

Vec3 backing_at(const BackingSpec& spec, int x, int y) {
  if (const auto* c = std::get_if<Rgb>(&spec)) return {c->r, c->g, c->b};
  const auto& img = std::get<ImageRGB>(spec);
  return {img(x, y, 0), img(x, y, 1), img(x, y, 2)};
}

void check_backing(const BackingSpec& spec, const ImageRGB& frame, const char* name) {
  if (const auto* img = std::get_if<ImageRGB>(&spec)) {
    if (!img->same_size(frame)) {
      throw DimensionError(std::string("triangulate: ") + name + " map does not match frame size");
    }
  }
}

}  // namespace

PixelMatte triangulate_pixel(const Vec3& c1, const Vec3& c2, const Vec3& b1, const Vec3& b2) {
  double dot = 0.0;
  double norm2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double db = b1[k] - b2[k];
    dot += (c1[k] - c2[k]) * db;
    norm2 += db * db;
  }
  if (norm2 < kDegenerateBackingDistance2) {
    throw DegenerateBacking("triangulate: backings too close (squared distance " +
                            std::to_string(norm2) + ")");
  }
  const double one_minus_alpha = std::clamp(dot / norm2, 0.0, 1.0);
  PixelMatte out;
  out.alpha = 1.0 - one_minus_alpha;
  if (out.alpha > kTriangulationAlphaMin) {
    for (int k = 0; k < 3; ++k) {
      const double e1 = (c1[k] - one_minus_alpha * b1[k]) / out.alpha;
      const double e2 = (c2[k] - one_minus_alpha * b2[k]) / out.alpha;
      out.fg[k] = std::clamp(0.5 * (e1 + e2), 0.0, 1.0);
    }
  }
  return out;
}

RgbaForeground triangulate_frame(const ImageRGB& f1, const ImageRGB& f2, const BackingSpec& b1,
                                 const BackingSpec& b2) {
  require_same_size(f1, f2, "triangulate_frame");
  check_backing(b1, f1, "backing1");
  check_backing(b2, f1, "backing2");
  RgbaForeground out(f1.width(), f1.height());
  for (int y = 0; y < f1.height(); ++y) {
    for (int x = 0; x < f1.width(); ++x) {
      const Vec3 c1{f1(x, y, 0), f1(x, y, 1), f1(x, y, 2)};
      const Vec3 c2{f2(x, y, 0), f2(x, y, 1), f2(x, y, 2)};
      PixelMatte m;
      try {
        m = triangulate_pixel(c1, c2, backing_at(b1, x, y), backing_at(b2, x, y));
      } catch (const DegenerateBacking& e) {
        throw NumericError(std::string(e.what()) + " at pixel (" + std::to_string(x) + "," +
                           std::to_string(y) + ")");
      }
      out.alpha.set(x, y, 0, static_cast<float>(m.alpha));
      for (int k = 0; k < 3; ++k) out.color.set(x, y, k, static_cast<float>(m.fg[k]));
    }
  }
  return out;
}

}  // namespace duplexmat
