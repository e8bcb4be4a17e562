#include "duplexmat/compositor.hpp"

#include <string>

namespace duplexmat {

SpillBlendMode parse_spill_mode(std::string_view name) {
  if (name == "text_semantics" || name == "text") return SpillBlendMode::TextSemantics;
  if (name == "verbatim_eq4" || name == "verbatim") return SpillBlendMode::VerbatimEq4;
  throw ConfigError("unknown spill mode '" + std::string(name) +
                    "' (expected text_semantics or verbatim_eq4)");
}

std::string_view to_string(SpillBlendMode mode) {
  return mode == SpillBlendMode::TextSemantics ? "text_semantics" : "verbatim_eq4";
}

ImageRGB compose(const ImageRGB& fg, const AlphaMatte& alpha, const ImageRGB& bg) {
  require_same_size(fg, alpha, "compose");
  require_same_size(fg, bg, "compose");
  ImageRGB out(fg.width(), fg.height());
  auto o = out.data();
  const auto f = fg.data();
  const auto b = bg.data();
  const auto a = alpha.data();
  for (std::size_t i = 0; i < alpha.pixel_count(); ++i) {
    const float ai = a[i];
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = i * 3 + c;
      o[k] = clamp01(ai * f[k] + (1.f - ai) * b[k]);
    }
  }
  return out;
}

ImageRGB compose_spill_corrected(const RgbaForeground& pred, const ImageRGB& orig_frame,
                                 const ImageRGB& bg, SpillBlendMode mode) {
  require_same_size(pred.color, orig_frame, "compose_spill_corrected");
  require_same_size(pred.color, bg, "compose_spill_corrected");
  ImageRGB out(bg.width(), bg.height());
  auto o = out.data();
  const auto p = pred.color.data();
  const auto f = orig_frame.data();
  const auto b = bg.data();
  const auto a = pred.alpha.data();
  const bool text = mode == SpillBlendMode::TextSemantics;
  for (std::size_t i = 0; i < pred.alpha.pixel_count(); ++i) {
    const float ai = a[i];
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = i * 3 + c;
      const float opaque_side = text ? f[k] : p[k];
      const float fringe_side = text ? p[k] : f[k];
      const float fg = ai * opaque_side + (1.f - ai) * fringe_side;
      o[k] = clamp01(ai * fg + (1.f - ai) * b[k]);
    }
  }
  return out;
}

Trimap trimap_from_alpha(const AlphaMatte& alpha, int dilation_radius) {
  if (dilation_radius < 0) throw ConfigError("trimap: dilation radius must be >= 0");
  const int w = alpha.width();
  const int h = alpha.height();
  Trimap tri(w, h);
  std::vector<std::uint8_t> unknown(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float a = alpha(x, y);
      unknown[static_cast<std::size_t>(y) * w + x] = (a > 0.f && a < 1.f) ? 1 : 0;
    }

  // Square structuring element is separable: dilate rows, then columns.
  auto dilate_1d = [&](std::vector<std::uint8_t>& src, bool horizontal) {
    std::vector<std::uint8_t> dst(src.size(), 0);
    const int outer = horizontal ? h : w;
    const int inner = horizontal ? w : h;
    for (int o = 0; o < outer; ++o) {
      int last_set = -1;  // most recent set index ahead of the window
      // Two sweeps keep it O(n) per line.
      std::vector<int> dist_prev(inner), dist_next(inner);
      for (int i = 0; i < inner; ++i) {
        const std::size_t idx = horizontal ? static_cast<std::size_t>(o) * w + i
                                           : static_cast<std::size_t>(i) * w + o;
        if (src[idx]) last_set = i;
        dist_prev[i] = last_set < 0 ? inner + dilation_radius + 1 : i - last_set;
      }
      last_set = -1;
      for (int i = inner - 1; i >= 0; --i) {
        const std::size_t idx = horizontal ? static_cast<std::size_t>(o) * w + i
                                           : static_cast<std::size_t>(i) * w + o;
        if (src[idx]) last_set = i;
        dist_next[i] = last_set < 0 ? inner + dilation_radius + 1 : last_set - i;
        if (std::min(dist_prev[i], dist_next[i]) <= dilation_radius) dst[idx] = 1;
      }
    }
    src.swap(dst);
  };
  if (dilation_radius > 0) {
    dilate_1d(unknown, true);
    dilate_1d(unknown, false);
  }

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (unknown[static_cast<std::size_t>(y) * w + x]) {
        tri(x, y) = TrimapLabel::Unknown;
      } else {
        tri(x, y) = alpha(x, y) >= 1.f ? TrimapLabel::Foreground : TrimapLabel::Background;
      }
    }
  return tri;
}

}  // namespace duplexmat
