#pragma once

#include <span>
#include <vector>

#include "duplexmat/net/config.hpp"
#include "duplexmat/net/network.hpp"
#include "duplexmat/net/tensor.hpp"

namespace duplexmat::net {

/// Masked Charbonnier loss summed over the inner square of the patch.
///
/// Per inner pixel: w_a * (rho(a1) + rho(a2)) + w_c * (m1 * sum_c rho(c1) + m2 * sum_c rho(c2)),
/// rho(r) = sqrt(r^2 + eps^2), m = [alpha_gt > 0]. Outputs and ground truths are
/// 4-channel maps (RGB + alpha).
template <typename T>
double loss(const Tensor<T>& out1, const Tensor<T>& out2, const Tensor<T>& gt1, const Tensor<T>& gt2,
            const LossConfig& cfg);

/// Same as loss(), also writing dLoss/d(out) for each output.
template <typename T>
double loss_with_grad(const Tensor<T>& out1, const Tensor<T>& out2, const Tensor<T>& gt1,
                      const Tensor<T>& gt2, const LossConfig& cfg, Tensor<T>& g1, Tensor<T>& g2);

/// One supervised pair in network layout.
template <typename T>
struct Sample {
  Tensor<T> input;  ///< 6 channels
  Tensor<T> gt1;    ///< 4 channels
  Tensor<T> gt2;
};

/// Summed loss over `batch` plus its gradient w.r.t. the flat parameters
/// (overwrites `grad`).
template <typename T>
double loss_and_grad(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                     const LossConfig& cfg, std::span<T> grad);

template <typename T>
std::vector<T> grad(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                    const LossConfig& cfg);

/// Summed loss over a batch without gradients.
template <typename T>
double batch_loss(const Network<T>& net, std::span<const T> params, std::span<const Sample<T>> batch,
                  const LossConfig& cfg);

}  // namespace duplexmat::net
