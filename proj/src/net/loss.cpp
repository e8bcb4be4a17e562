#include "duplexmat/net/loss.hpp"

#include <cmath>

#include "duplexmat/errors.hpp"

namespace duplexmat::net {

namespace {

template <typename T>
void check_shapes(const Tensor<T>& out, const Tensor<T>& gt, const LossConfig& cfg) {
  if (out.channels != 4 || !out.same_shape(gt)) throw DimensionError("loss: output/ground truth shape mismatch");
  if (out.height != out.width) throw DimensionError("loss: patches must be square");
  cfg.validate(out.width);
}

// Accumulates one frame's loss; writes the residual gradient if g is non-null.
template <typename T>
double frame_loss(const Tensor<T>& out, const Tensor<T>& gt, const LossConfig& cfg, Tensor<T>* g) {
  const int n = out.width;
  const int b = cfg.inner_border;
  const double eps2 = cfg.epsilon * cfg.epsilon;
  double total = 0.0;
  for (int y = b; y < n - b; ++y) {
    for (int x = b; x < n - b; ++x) {
      const double ag = gt.at(3, y, x);
      const double ra = static_cast<double>(out.at(3, y, x)) - ag;
      const double rho_a = std::sqrt(ra * ra + eps2);
      total += cfg.alpha_weight * rho_a;
      if (g) g->at(3, y, x) = static_cast<T>(cfg.alpha_weight * ra / rho_a);
      if (ag > 0.0) {
        for (int c = 0; c < 3; ++c) {
          const double rc = static_cast<double>(out.at(c, y, x)) - gt.at(c, y, x);
          const double rho_c = std::sqrt(rc * rc + eps2);
          total += cfg.color_weight * rho_c;
          if (g) g->at(c, y, x) = static_cast<T>(cfg.color_weight * rc / rho_c);
        }
      }
    }
  }
  return total;
}

}  // namespace

template <typename T>
double loss(const Tensor<T>& out1, const Tensor<T>& out2, const Tensor<T>& gt1, const Tensor<T>& gt2,
            const LossConfig& cfg) {
  check_shapes(out1, gt1, cfg);
  check_shapes(out2, gt2, cfg);
  return frame_loss<T>(out1, gt1, cfg, nullptr) + frame_loss<T>(out2, gt2, cfg, nullptr);
}

template <typename T>
double loss_with_grad(const Tensor<T>& out1, const Tensor<T>& out2, const Tensor<T>& gt1,
                      const Tensor<T>& gt2, const LossConfig& cfg, Tensor<T>& g1, Tensor<T>& g2) {
  check_shapes(out1, gt1, cfg);
  check_shapes(out2, gt2, cfg);
  g1 = Tensor<T>(out1.channels, out1.height, out1.width);
  g2 = Tensor<T>(out2.channels, out2.height, out2.width);
  return frame_loss(out1, gt1, cfg, &g1) + frame_loss(out2, gt2, cfg, &g2);
}

template <typename T>
double loss_and_grad(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                     const LossConfig& cfg, std::span<T> grad) {
  std::fill(grad.begin(), grad.end(), T(0));
  double total = 0.0;
  for (const Sample<T>& s : batch) {
    Tape<T> tape;
    const NetworkOutput<T> out = net.forward(params, s.input, tape);
    Tensor<T> g1, g2;
    const double l = loss_with_grad(out.frame1, out.frame2, s.gt1, s.gt2, cfg, g1, g2);
    if (!std::isfinite(l)) throw NumericError("non-finite loss");
    total += l;
    net.backward(params, tape, g1, g2, grad);
  }
  return total;
}

template <typename T>
std::vector<T> grad(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                    const LossConfig& cfg) {
  std::vector<T> g(net.param_count());
  loss_and_grad<T>(net, params, batch, cfg, g);
  return g;
}

template <typename T>
double batch_loss(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                  const LossConfig& cfg) {
  double total = 0.0;
  for (const Sample<T>& s : batch) {
    const NetworkOutput<T> out = net.forward(params, s.input);
    total += loss(out.frame1, out.frame2, s.gt1, s.gt2, cfg);
  }
  return total;
}

#define DUPLEXMAT_INSTANTIATE(T)                                                                     \
  template double loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                          const LossConfig&);                                                        \
  template double loss_with_grad<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                    const Tensor<T>&, const LossConfig&, Tensor<T>&, Tensor<T>&);    \
  template double loss_and_grad<T>(const Network<T>&, std::span<const T>, std::span<const Sample<T>>, \
                                   const LossConfig&, std::span<T>);                                 \
  template std::vector<T> grad<T>(const Network<T>&, std::span<const T>, std::span<const Sample<T>>, \
                                  const LossConfig&);                                                \
  template double batch_loss<T>(const Network<T>&, std::span<const T>, std::span<const Sample<T>>,   \
                                const LossConfig&);

DUPLEXMAT_INSTANTIATE(float)
DUPLEXMAT_INSTANTIATE(double)

#undef DUPLEXMAT_INSTANTIATE

}  // namespace duplexmat::net
