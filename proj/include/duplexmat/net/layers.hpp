#pragma once

#include <cstdint>
#include <vector>

#include "duplexmat/net/tensor.hpp"

// Forward/backward kernels. Backward functions accumulate (+=) into the
// parameter gradients and overwrite the input gradient.

namespace duplexmat::net::layers {

/// 3x3 convolution, stride 1, zero padding 1. weights: [cout][cin][3][3].
template <typename T>
void conv3x3_forward(const Tensor<T>& in, const T* weights, const T* bias, int cout, Tensor<T>& out);

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const T* weights, const Tensor<T>& grad_out,
                      T* grad_weights, T* grad_bias, Tensor<T>* grad_in);

/// Transposed convolution, kernel 6, stride 2, padding 2 (exact 2x
/// upsampling). weights: [cin][cout][6][6].
inline constexpr int kDeconvKernel = 6;
inline constexpr int kDeconvStride = 2;
inline constexpr int kDeconvPad = 2;

template <typename T>
void deconv_forward(const Tensor<T>& in, const T* weights, const T* bias, int cout, Tensor<T>& out);

template <typename T>
void deconv_backward(const Tensor<T>& in, const T* weights, const Tensor<T>& grad_out,
                     T* grad_weights, T* grad_bias, Tensor<T>& grad_in);

inline constexpr double kGroupNormEps = 1e-5;

/// Group normalization followed by the affine transform. Keeps the
/// normalized values and per-group reciprocal std for the backward pass.
template <typename T>
void group_norm_forward(const Tensor<T>& in, int groups, const T* gamma, const T* beta,
                        Tensor<T>& normalized, std::vector<T>& rstd, Tensor<T>& out);

template <typename T>
void group_norm_backward(const Tensor<T>& normalized, const std::vector<T>& rstd, int groups,
                         const T* gamma, const Tensor<T>& grad_out, T* grad_gamma, T* grad_beta,
                         Tensor<T>& grad_in);

template <typename T>
void relu_inplace(Tensor<T>& t);
/// grad *= (activated > 0)
template <typename T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad);

/// 2x2 max pooling, stride 2. argmax holds the winning flat input index.
template <typename T>
void maxpool_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::int32_t>& argmax);
template <typename T>
void maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::int32_t>& argmax, int in_h,
                      int in_w, Tensor<T>& grad_in);

}  // namespace duplexmat::net::layers
