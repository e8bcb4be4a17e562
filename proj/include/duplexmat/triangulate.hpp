#pragma once

#include <array>
#include <variant>

#include "duplexmat/image.hpp"

namespace duplexmat {

using Vec3 = std::array<double, 3>;

/// A backing is either one constant color or a per-pixel map.
using BackingSpec = std::variant<Rgb, ImageRGB>;

/// Below this alpha the foreground color is undefined and reported as black.
inline constexpr double kTriangulationAlphaMin = 1e-3;
/// Minimum squared distance between the two backing colors.
inline constexpr double kDegenerateBackingDistance2 = 1e-6;

struct PixelMatte {
  double alpha = 0.0;
  Vec3 fg{0.0, 0.0, 0.0};
};

/// Solves c_j = a*F + (1-a)*b_j for j = 1,2 in the least-squares sense.
///
/// (1-a) is the projection of c1-c2 onto b1-b2; F is the mean of the two
/// per-frame estimates. Throws NumericError when the backings are closer than
/// kDegenerateBackingDistance2.
PixelMatte triangulate_pixel(const Vec3& c1, const Vec3& c2, const Vec3& b1, const Vec3& b2);

/// Per-pixel triangulation over two registered frames.
RgbaForeground triangulate_frame(const ImageRGB& f1, const ImageRGB& f2, const BackingSpec& b1,
                                 const BackingSpec& b2);

}  // namespace duplexmat
