#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "duplexmat/image.hpp"

namespace duplexmat::net {

/// Dense CHW feature map.
template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> values;

  Tensor() = default;
  Tensor(int c, int h, int w)
      : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, T(0)) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  T* plane(int c) { return values.data() + c * plane_size(); }
  const T* plane(int c) const { return values.data() + c * plane_size(); }
  T& at(int c, int y, int x) { return values[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  T at(int c, int y, int x) const {
    return values[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Concatenates two RGB patches into the 6-channel network input.
template <typename T>
Tensor<T> pack_input(const ImageRGB& p1, const ImageRGB& p2);

/// 4-channel map (RGB + alpha) from / to an RgbaForeground.
template <typename T>
Tensor<T> pack_rgba(const RgbaForeground& fg);
template <typename T>
RgbaForeground unpack_rgba(const Tensor<T>& t);

}  // namespace duplexmat::net
