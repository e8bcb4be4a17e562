#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duplexmat/net/config.hpp"
#include "duplexmat/net/tensor.hpp"

namespace duplexmat::net {

// Offsets of one layer's parameters inside the flat parameter vector.
struct ConvSlot {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  std::size_t weights = 0;
  std::optional<std::size_t> bias;
};

struct NormSlot {
  std::string name;
  int channels = 0;
  int groups = 1;
  std::size_t gamma = 0;
  std::size_t beta = 0;
};

struct DeconvSlot {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  std::size_t weights = 0;
  std::size_t bias = 0;
};

/// conv3x3 (no bias) -> group norm -> ReLU
struct ConvNormRelu {
  ConvSlot conv;
  NormSlot norm;
};

struct DecoderBlock {
  ConvNormRelu body;
  DeconvSlot up;
};

struct DecoderLayout {
  std::vector<DecoderBlock> blocks;  ///< deepest first
  ConvSlot head;                     ///< conv3x3 to 4 channels, with bias
};

template <typename T>
struct NetworkOutput {
  Tensor<T> frame1;  ///< 4 channels: color (ReLU, clipped at 1), alpha (sigmoid)
  Tensor<T> frame2;
};

/// Intermediate activations kept for the backward pass.
template <typename T>
struct Tape;

/// Contiguous slice of the flat parameter vector belonging to one tensor.
struct ParamTensor {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string name;
};

/// One-encoder, dual-decoder matting network.
///
/// The encoder consumes both patches as a 6-channel stack through five blocks
/// of (2,2,3,3,3) conv-norm-ReLU layers, each followed by 2x max pooling.
/// Each decoder mirrors the encoder widths: per level one conv-norm-ReLU and a
/// kernel-6 stride-2 transposed convolution, with the matching encoder block
/// output added afterwards. A final conv produces RGB + alpha.
template <typename T>
class Network {
public:
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t param_count() const { return param_count_; }

  /// Fan-in scaled normal initialization; norm scales 1, offsets and biases 0.
  std::vector<T> init_params(std::uint64_t seed) const;

  NetworkOutput<T> forward(std::span<const T> params, const Tensor<T>& input) const;

  /// Forward pass that records a tape; pair with backward().
  NetworkOutput<T> forward(std::span<const T> params, const Tensor<T>& input, Tape<T>& tape) const;

  /// Accumulates dLoss/dparams into `grad` given dLoss/d(outputs).
  void backward(std::span<const T> params, const Tape<T>& tape, const Tensor<T>& grad_out1,
                const Tensor<T>& grad_out2, std::span<T> grad) const;

  /// Human-readable name of the layer owning flat parameter `index`.
  std::string parameter_owner(std::size_t index) const;
  const ParamTensor& parameter_tensor(std::size_t index) const;
  const std::vector<ParamTensor>& parameter_tensors() const { return ranges_; }

  const std::vector<std::vector<ConvNormRelu>>& encoder() const { return encoder_; }
  const DecoderLayout& decoder(int which) const { return decoders_[which]; }

private:
  NetworkOutput<T> run(std::span<const T> params, const Tensor<T>& input, Tape<T>* tape) const;

  ModelConfig config_;
  std::vector<std::vector<ConvNormRelu>> encoder_;
  DecoderLayout decoders_[2];
  std::size_t param_count_ = 0;
  std::vector<ParamTensor> ranges_;
};

template <typename T>
struct CnrTape {
  Tensor<T> input;
  Tensor<T> normalized;
  std::vector<T> rstd;
  Tensor<T> output;
};

template <typename T>
struct DecoderTape {
  std::vector<CnrTape<T>> blocks;  ///< deepest first, matches DecoderLayout
  Tensor<T> head_input;
  Tensor<T> head_pre_activation;
};

template <typename T>
struct Tape {
  std::vector<std::vector<CnrTape<T>>> encoder;
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<std::pair<int, int>> pool_input_shape;
  DecoderTape<T> decoders[2];
};

/// Head activation: channels 0-2 min(max(z,0),1), channel 3 sigmoid(z).
template <typename T>
void head_activation(const Tensor<T>& pre, Tensor<T>& out);

}  // namespace duplexmat::net
