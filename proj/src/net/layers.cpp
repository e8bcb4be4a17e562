#include "duplexmat/net/layers.hpp"

#include <algorithm>
#include <cmath>

namespace duplexmat::net {

template <typename T>
Tensor<T> pack_input(const ImageRGB& p1, const ImageRGB& p2) {
  require_same_size(p1, p2, "network input");
  Tensor<T> t(6, p1.height(), p1.width());
  for (int y = 0; y < p1.height(); ++y)
    for (int x = 0; x < p1.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        t.at(c, y, x) = static_cast<T>(p1(x, y, c));
        t.at(c + 3, y, x) = static_cast<T>(p2(x, y, c));
      }
  return t;
}

template <typename T>
Tensor<T> pack_rgba(const RgbaForeground& fg) {
  Tensor<T> t(4, fg.height(), fg.width());
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x) {
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<T>(fg.color(x, y, c));
      t.at(3, y, x) = static_cast<T>(fg.alpha(x, y));
    }
  return t;
}

template <typename T>
RgbaForeground unpack_rgba(const Tensor<T>& t) {
  RgbaForeground fg(t.width, t.height);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      for (int c = 0; c < 3; ++c) fg.color.set(x, y, c, static_cast<float>(t.at(c, y, x)));
      fg.alpha.set(x, y, 0, static_cast<float>(t.at(3, y, x)));
    }
  return fg;
}

template Tensor<float> pack_input<float>(const ImageRGB&, const ImageRGB&);
template Tensor<double> pack_input<double>(const ImageRGB&, const ImageRGB&);
template Tensor<float> pack_rgba<float>(const RgbaForeground&);
template Tensor<double> pack_rgba<double>(const RgbaForeground&);
template RgbaForeground unpack_rgba<float>(const Tensor<float>&);
template RgbaForeground unpack_rgba<double>(const Tensor<double>&);

namespace layers {

template <typename T>
void conv3x3_forward(const Tensor<T>& in, const T* weights, const T* bias, int cout, Tensor<T>& out) {
  const int h = in.height, w = in.width, cin = in.channels;
  out = Tensor<T>(cout, h, w);
  for (int co = 0; co < cout; ++co) {
    T* op = out.plane(co);
    if (bias) std::fill(op, op + out.plane_size(), bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in.plane(ci);
      const T* k = weights + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const T wv = k[ky * 3 + kx];
          for (int y = y0; y < y1; ++y) {
            const std::ptrdiff_t irow = static_cast<std::ptrdiff_t>(y + dy) * w + dx;
            T* orow = op + static_cast<std::size_t>(y) * w;
#pragma omp simd
            for (int x = x0; x < x1; ++x) orow[x] += wv * ip[irow + x];
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const T* weights, const Tensor<T>& grad_out,
                      T* grad_weights, T* grad_bias, Tensor<T>* grad_in) {
  const int h = in.height, w = in.width, cin = in.channels, cout = grad_out.channels;
  if (grad_in) *grad_in = Tensor<T>(cin, h, w);
  for (int co = 0; co < cout; ++co) {
    const T* gp = grad_out.plane(co);
    if (grad_bias) {
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < grad_out.plane_size(); ++i) acc += gp[i];
      grad_bias[co] += acc;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in.plane(ci);
      T* gip = grad_in ? grad_in->plane(ci) : nullptr;
      const std::size_t koff = (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const T wv = weights[koff + ky * 3 + kx];
          T acc = 0;
          for (int y = y0; y < y1; ++y) {
            const std::ptrdiff_t irow = static_cast<std::ptrdiff_t>(y + dy) * w + dx;
            const T* grow = gp + static_cast<std::size_t>(y) * w;
#pragma omp simd reduction(+ : acc)
            for (int x = x0; x < x1; ++x) acc += grow[x] * ip[irow + x];
            if (gip) {
#pragma omp simd
              for (int x = x0; x < x1; ++x) gip[irow + x] += wv * grow[x];
            }
          }
          grad_weights[koff + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

namespace {

// Valid input rows/cols for kernel tap k: 0 <= i*stride - pad + k < out_len.
inline void deconv_range(int k, int in_len, int out_len, int& lo, int& hi) {
  lo = std::max(0, (kDeconvPad - k + kDeconvStride - 1) / kDeconvStride);
  hi = std::min(in_len, (out_len + kDeconvPad - k + kDeconvStride - 1) / kDeconvStride);
}

}  // namespace

template <typename T>
void deconv_forward(const Tensor<T>& in, const T* weights, const T* bias, int cout, Tensor<T>& out) {
  const int h = in.height, w = in.width, cin = in.channels;
  const int oh = h * kDeconvStride, ow = w * kDeconvStride;
  out = Tensor<T>(cout, oh, ow);
  for (int co = 0; co < cout; ++co) std::fill(out.plane(co), out.plane(co) + out.plane_size(), bias[co]);
  constexpr int K = kDeconvKernel;
  for (int ci = 0; ci < cin; ++ci) {
    const T* ip = in.plane(ci);
    for (int co = 0; co < cout; ++co) {
      T* op = out.plane(co);
      const T* k = weights + (static_cast<std::size_t>(ci) * cout + co) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        int iy0, iy1;
        deconv_range(ky, h, oh, iy0, iy1);
        for (int kx = 0; kx < K; ++kx) {
          int ix0, ix1;
          deconv_range(kx, w, ow, ix0, ix1);
          const T wv = k[ky * K + kx];
          for (int iy = iy0; iy < iy1; ++iy) {
            const int oy = iy * kDeconvStride - kDeconvPad + ky;
            const T* irow = ip + static_cast<std::size_t>(iy) * w;
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(oy) * ow - kDeconvPad + kx;
            for (int ix = ix0; ix < ix1; ++ix) op[base + ix * kDeconvStride] += wv * irow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void deconv_backward(const Tensor<T>& in, const T* weights, const Tensor<T>& grad_out,
                     T* grad_weights, T* grad_bias, Tensor<T>& grad_in) {
  const int h = in.height, w = in.width, cin = in.channels, cout = grad_out.channels;
  const int oh = grad_out.height, ow = grad_out.width;
  grad_in = Tensor<T>(cin, h, w);
  for (int co = 0; co < cout; ++co) {
    const T* gp = grad_out.plane(co);
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < grad_out.plane_size(); ++i) acc += gp[i];
    grad_bias[co] += acc;
  }
  constexpr int K = kDeconvKernel;
  for (int ci = 0; ci < cin; ++ci) {
    const T* ip = in.plane(ci);
    T* gip = grad_in.plane(ci);
    for (int co = 0; co < cout; ++co) {
      const T* gp = grad_out.plane(co);
      const std::size_t koff = (static_cast<std::size_t>(ci) * cout + co) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        int iy0, iy1;
        deconv_range(ky, h, oh, iy0, iy1);
        for (int kx = 0; kx < K; ++kx) {
          int ix0, ix1;
          deconv_range(kx, w, ow, ix0, ix1);
          const T wv = weights[koff + ky * K + kx];
          T acc = 0;
          for (int iy = iy0; iy < iy1; ++iy) {
            const int oy = iy * kDeconvStride - kDeconvPad + ky;
            const T* irow = ip + static_cast<std::size_t>(iy) * w;
            T* girow = gip + static_cast<std::size_t>(iy) * w;
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(oy) * ow - kDeconvPad + kx;
            for (int ix = ix0; ix < ix1; ++ix) {
              const T g = gp[base + ix * kDeconvStride];
              acc += g * irow[ix];
              girow[ix] += wv * g;
            }
          }
          grad_weights[koff + ky * K + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
void group_norm_forward(const Tensor<T>& in, int groups, const T* gamma, const T* beta,
                        Tensor<T>& normalized, std::vector<T>& rstd, Tensor<T>& out) {
  const int c = in.channels;
  const int per_group = c / groups;
  const std::size_t plane = in.plane_size();
  const std::size_t n = plane * per_group;
  normalized = Tensor<T>(c, in.height, in.width);
  out = Tensor<T>(c, in.height, in.width);
  rstd.assign(groups, T(0));
  for (int g = 0; g < groups; ++g) {
    const T* src = in.plane(g * per_group);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += src[i];
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + kGroupNormEps);
    rstd[g] = static_cast<T>(rs);
    T* xh = normalized.plane(g * per_group);
    for (std::size_t i = 0; i < n; ++i) xh[i] = static_cast<T>((src[i] - mean) * rs);
    for (int k = 0; k < per_group; ++k) {
      const int ch = g * per_group + k;
      const T* xp = normalized.plane(ch);
      T* op = out.plane(ch);
      const T ga = gamma[ch], be = beta[ch];
#pragma omp simd
      for (std::size_t i = 0; i < plane; ++i) op[i] = ga * xp[i] + be;
    }
  }
}

template <typename T>
void group_norm_backward(const Tensor<T>& normalized, const std::vector<T>& rstd, int groups,
                         const T* gamma, const Tensor<T>& grad_out, T* grad_gamma, T* grad_beta,
                         Tensor<T>& grad_in) {
  const int c = normalized.channels;
  const int per_group = c / groups;
  const std::size_t plane = normalized.plane_size();
  const double n = static_cast<double>(plane * per_group);
  grad_in = Tensor<T>(c, normalized.height, normalized.width);
  for (int g = 0; g < groups; ++g) {
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (int k = 0; k < per_group; ++k) {
      const int ch = g * per_group + k;
      const T* gp = grad_out.plane(ch);
      const T* xp = normalized.plane(ch);
      double gg = 0.0, gb = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        gg += static_cast<double>(gp[i]) * xp[i];
        gb += gp[i];
      }
      grad_gamma[ch] += static_cast<T>(gg);
      grad_beta[ch] += static_cast<T>(gb);
      sum_dxh += gamma[ch] * gb;
      sum_dxh_xh += gamma[ch] * gg;
    }
    const double rs = rstd[g];
    for (int k = 0; k < per_group; ++k) {
      const int ch = g * per_group + k;
      const T* gp = grad_out.plane(ch);
      const T* xp = normalized.plane(ch);
      T* dst = grad_in.plane(ch);
      const double ga = gamma[ch];
      for (std::size_t i = 0; i < plane; ++i) {
        const double dxh = ga * gp[i];
        dst[i] = static_cast<T>(rs / n * (n * dxh - sum_dxh - xp[i] * sum_dxh_xh));
      }
    }
  }
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (T& v : t.values) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad) {
  for (std::size_t i = 0; i < grad.values.size(); ++i)
    if (!(activated.values[i] > T(0))) grad.values[i] = T(0);
}

template <typename T>
void maxpool_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::int32_t>& argmax) {
  const int oh = in.height / 2, ow = in.width / 2;
  out = Tensor<T>(in.channels, oh, ow);
  argmax.assign(out.values.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    const T* ip = in.plane(c);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        std::int32_t best = (2 * y) * in.width + 2 * x;
        const std::int32_t cand[3] = {best + 1, best + in.width, best + in.width + 1};
        for (std::int32_t k : cand)
          if (ip[k] > ip[best]) best = k;
        const std::size_t o = c * out.plane_size() + static_cast<std::size_t>(y) * ow + x;
        out.values[o] = ip[best];
        argmax[o] = best;
      }
  }
}

template <typename T>
void maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::int32_t>& argmax, int in_h,
                      int in_w, Tensor<T>& grad_in) {
  grad_in = Tensor<T>(grad_out.channels, in_h, in_w);
  for (int c = 0; c < grad_out.channels; ++c) {
    T* gp = grad_in.plane(c);
    for (std::size_t i = 0; i < grad_out.plane_size(); ++i) {
      const std::size_t o = c * grad_out.plane_size() + i;
      gp[argmax[o]] += grad_out.values[o];
    }
  }
}

#define DUPLEXMAT_INSTANTIATE(T)                                                                 \
  template void conv3x3_forward<T>(const Tensor<T>&, const T*, const T*, int, Tensor<T>&);      \
  template void conv3x3_backward<T>(const Tensor<T>&, const T*, const Tensor<T>&, T*, T*,       \
                                    Tensor<T>*);                                                \
  template void deconv_forward<T>(const Tensor<T>&, const T*, const T*, int, Tensor<T>&);       \
  template void deconv_backward<T>(const Tensor<T>&, const T*, const Tensor<T>&, T*, T*,        \
                                   Tensor<T>&);                                                 \
  template void group_norm_forward<T>(const Tensor<T>&, int, const T*, const T*, Tensor<T>&,    \
                                      std::vector<T>&, Tensor<T>&);                             \
  template void group_norm_backward<T>(const Tensor<T>&, const std::vector<T>&, int, const T*, \
                                       const Tensor<T>&, T*, T*, Tensor<T>&);                   \
  template void relu_inplace<T>(Tensor<T>&);                                                    \
  template void relu_backward_inplace<T>(const Tensor<T>&, Tensor<T>&);                         \
  template void maxpool_forward<T>(const Tensor<T>&, Tensor<T>&, std::vector<std::int32_t>&);   \
  template void maxpool_backward<T>(const Tensor<T>&, const std::vector<std::int32_t>&, int, int, \
                                    Tensor<T>&);

DUPLEXMAT_INSTANTIATE(float)
DUPLEXMAT_INSTANTIATE(double)
#undef DUPLEXMAT_INSTANTIATE

}  // namespace layers
}  // namespace duplexmat::net
