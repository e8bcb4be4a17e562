#include "duplexmat/image.hpp"

#include <cmath>

namespace duplexmat {

ImageRGB make_solid(int width, int height, Rgb color) {
  ImageRGB img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) set_pixel(img, x, y, color);
  return img;
}

ImageRGB make_checkerboard(int width, int height, int cell, Rgb color_a, Rgb color_b) {
  if (width <= 0 || height <= 0) throw ConfigError("checkerboard: zero-sized image");
  if (cell < 1) throw ConfigError("checkerboard: cell must be >= 1");
  ImageRGB img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      set_pixel(img, x, y, ((x / cell + y / cell) % 2 == 0) ? color_a : color_b);
  return img;
}

template <int C>
Raster<C> crop(const Raster<C>& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > src.width() || y0 + h > src.height()) {
    throw ConfigError("crop rectangle (" + std::to_string(x0) + "," + std::to_string(y0) + " " +
                      std::to_string(w) + "x" + std::to_string(h) + ") outside " +
                      std::to_string(src.width()) + "x" + std::to_string(src.height()));
  }
  Raster<C> out(w, h);
  auto s = src.data();
  auto d = out.data();
  for (int y = 0; y < h; ++y) {
    const std::size_t si = src.index(x0, y0 + y);
    const std::size_t di = out.index(0, y);
    std::copy_n(s.begin() + si, static_cast<std::size_t>(w) * C, d.begin() + di);
  }
  return out;
}

RgbaForeground crop(const RgbaForeground& src, int x0, int y0, int w, int h) {
  return {crop(src.color, x0, y0, w, h), crop(src.alpha, x0, y0, w, h)};
}

namespace {

struct Tap {
  int src;
  float weight;
};

// 1D box-filter taps mapping src_len samples onto dst_len samples.
std::vector<std::vector<Tap>> area_taps(int src_len, int dst_len) {
  std::vector<std::vector<Tap>> taps(dst_len);
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int o = 0; o < dst_len; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    double total = 0.0;
    for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)) && s < src_len;
         ++s) {
      const double cover = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (cover <= 0.0) continue;
      taps[o].push_back({s, static_cast<float>(cover)});
      total += cover;
    }
    for (Tap& t : taps[o]) t.weight = static_cast<float>(t.weight / total);
  }
  return taps;
}

}  // namespace

template <int C>
Raster<C> resize_area(const Raster<C>& src, int width, int height) {
  if (width <= 0 || height <= 0) throw ConfigError("resize: zero-sized target");
  if (src.same_size(width, height)) return src;
  const auto tx = area_taps(src.width(), width);
  const auto ty = area_taps(src.height(), height);

  // Horizontal pass into a float buffer, then vertical.
  std::vector<float> tmp(static_cast<std::size_t>(width) * src.height() * C, 0.f);
  auto s = src.data();
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      for (const Tap& t : tx[x]) {
        const std::size_t si = src.index(t.src, y);
        for (int c = 0; c < C; ++c)
          tmp[(static_cast<std::size_t>(y) * width + x) * C + c] += t.weight * s[si + c];
      }
    }
  }
  Raster<C> out(width, height);
  auto d = out.data();
  for (int y = 0; y < height; ++y) {
    for (const Tap& t : ty[y]) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < C; ++c)
          d[out.index(x, y) + c] += t.weight * tmp[(static_cast<std::size_t>(t.src) * width + x) * C + c];
      }
    }
  }
  out.clamp_in_place();
  return out;
}

RgbaForeground resize_area(const RgbaForeground& src, int width, int height) {
  if (src.color.same_size(width, height)) return src;
  ImageRGB premul(src.width(), src.height());
  {
    auto p = premul.data();
    auto c = src.color.data();
    auto a = src.alpha.data();
    for (std::size_t i = 0; i < src.alpha.pixel_count(); ++i)
      for (int k = 0; k < 3; ++k) p[i * 3 + k] = c[i * 3 + k] * a[i];
  }
  AlphaMatte alpha = resize_area(src.alpha, width, height);
  ImageRGB pm = resize_area(premul, width, height);
  ImageRGB plain = resize_area(src.color, width, height);
  ImageRGB color(width, height);
  auto out = color.data();
  auto pmd = pm.data();
  auto pld = plain.data();
  auto ad = alpha.data();
  for (std::size_t i = 0; i < alpha.pixel_count(); ++i) {
    for (int k = 0; k < 3; ++k) {
      out[i * 3 + k] = ad[i] > 1e-6f ? clamp01(pmd[i * 3 + k] / ad[i]) : pld[i * 3 + k];
    }
  }
  return {std::move(color), std::move(alpha)};
}

template <int C>
Raster<C> flip_horizontal(const Raster<C>& src) {
  Raster<C> out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < C; ++c) out(x, y, c) = src(src.width() - 1 - x, y, c);
  return out;
}

template Raster<1> crop(const Raster<1>&, int, int, int, int);
template Raster<3> crop(const Raster<3>&, int, int, int, int);
template Raster<1> resize_area(const Raster<1>&, int, int);
template Raster<3> resize_area(const Raster<3>&, int, int);
template Raster<1> flip_horizontal(const Raster<1>&);
template Raster<3> flip_horizontal(const Raster<3>&);

}  // namespace duplexmat
