#pragma once

#include <string_view>

#include "duplexmat/image.hpp"

namespace duplexmat {

/// Weighting used when recompositing a predicted foreground over new content.
///
/// TextSemantics keeps the camera colors where the prediction is opaque and
/// switches to the predicted spill-free colors in the transparent fringe:
///   out = a*(a*orig + (1-a)*pred) + (1-a)*bg
/// VerbatimEq4 swaps the inner weights:
///   out = a*(a*pred + (1-a)*orig) + (1-a)*bg
enum class SpillBlendMode { VerbatimEq4, TextSemantics };

SpillBlendMode parse_spill_mode(std::string_view name);
std::string_view to_string(SpillBlendMode mode);

/// out = alpha*fg + (1-alpha)*bg per pixel and channel.
ImageRGB compose(const ImageRGB& fg, const AlphaMatte& alpha, const ImageRGB& bg);
inline ImageRGB compose(const RgbaForeground& fg, const ImageRGB& bg) {
  return compose(fg.color, fg.alpha, bg);
}

/// Spill-corrected recomposition of a prediction. `orig_frame` is the camera
/// frame the prediction came from.
ImageRGB compose_spill_corrected(const RgbaForeground& pred, const ImageRGB& orig_frame,
                                 const ImageRGB& bg,
                                 SpillBlendMode mode = SpillBlendMode::TextSemantics);

/// Labels 0<alpha<1 unknown, dilates the unknown band with a square element of
/// half-width `dilation_radius`, and labels the rest by alpha (1 foreground,
/// 0 background).
Trimap trimap_from_alpha(const AlphaMatte& alpha, int dilation_radius = 10);

}  // namespace duplexmat
