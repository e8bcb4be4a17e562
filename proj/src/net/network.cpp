#include "duplexmat/net/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "duplexmat/errors.hpp"
#include "duplexmat/net/layers.hpp"

namespace duplexmat::net {

namespace {

constexpr int kConvsPerBlock[kEncoderBlocks] = {2, 2, 3, 3, 3};

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& layer) {
  for (T v : t.values) {
    if (!std::isfinite(v)) throw NumericError("non-finite activation in layer " + layer);
  }
}

}  // namespace

template <typename T>
Network<T>::Network(ModelConfig config) : config_(config) {
  config_.validate();
  std::size_t next = 0;
  auto alloc = [&](std::size_t n, const std::string& name) {
    const std::size_t at = next;
    next += n;
    ranges_.push_back({at, next, name});
    return at;
  };
  auto conv = [&](const std::string& name, int cin, int cout, bool bias) {
    ConvSlot s{name, cin, cout, 0, std::nullopt};
    s.weights = alloc(static_cast<std::size_t>(cin) * cout * 9, name + ".weight");
    if (bias) s.bias = alloc(cout, name + ".bias");
    return s;
  };
  auto norm = [&](const std::string& name, int channels) {
    NormSlot s{name, channels, config_.groups_for(channels), 0, 0};
    s.gamma = alloc(channels, name + ".gamma");
    s.beta = alloc(channels, name + ".beta");
    return s;
  };

  const std::vector<int> widths = config_.widths();
  int channels = 6;
  for (int b = 0; b < kEncoderBlocks; ++b) {
    std::vector<ConvNormRelu> block;
    for (int l = 0; l < kConvsPerBlock[b]; ++l) {
      const std::string name = "enc" + std::to_string(b + 1) + "." + std::to_string(l + 1);
      block.push_back({conv(name + ".conv", channels, widths[b], false), norm(name + ".norm", widths[b])});
      channels = widths[b];
    }
    encoder_.push_back(std::move(block));
  }
  for (int d = 0; d < 2; ++d) {
    DecoderLayout& dec = decoders_[d];
    int in = widths.back();
    for (int level = kEncoderBlocks - 1; level >= 0; --level) {
      const std::string name = "dec" + std::to_string(d + 1) + ".up" + std::to_string(level + 1);
      DecoderBlock blk;
      blk.body = {conv(name + ".conv", in, widths[level], false), norm(name + ".norm", widths[level])};
      blk.up.name = name + ".deconv";
      blk.up.in_channels = widths[level];
      blk.up.out_channels = widths[level];
      blk.up.weights = alloc(static_cast<std::size_t>(widths[level]) * widths[level] *
                                 layers::kDeconvKernel * layers::kDeconvKernel,
                             blk.up.name + ".weight");
      blk.up.bias = alloc(widths[level], blk.up.name + ".bias");
      dec.blocks.push_back(std::move(blk));
      in = widths[level];
    }
    dec.head = conv("dec" + std::to_string(d + 1) + ".head", widths.front(), 4, true);
  }
  param_count_ = next;
}

template <typename T>
std::vector<T> Network<T>::init_params(std::uint64_t seed) const {
  std::vector<T> p(param_count_, T(0));
  std::mt19937_64 rng(seed);
  auto fill_normal = [&](std::size_t at, std::size_t n, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < n; ++i) p[at + i] = static_cast<T>(dist(rng));
  };
  auto init_conv = [&](const ConvSlot& c, double gain) {
    const double fan_in = 9.0 * c.in_channels;
    fill_normal(c.weights, static_cast<std::size_t>(c.in_channels) * c.out_channels * 9,
                std::sqrt(gain / fan_in));
  };
  auto init_norm = [&](const NormSlot& n) {
    for (int i = 0; i < n.channels; ++i) p[n.gamma + i] = T(1);
  };
  for (const auto& block : encoder_)
    for (const auto& l : block) {
      init_conv(l.conv, 2.0);
      init_norm(l.norm);
    }
  for (const auto& dec : decoders_) {
    for (const auto& blk : dec.blocks) {
      init_conv(blk.body.conv, 2.0);
      init_norm(blk.body.norm);
      // Each output pixel of a stride-2 kernel-6 deconv sees 3x3 taps per input channel.
      const double fan_in = 9.0 * blk.up.in_channels;
      fill_normal(blk.up.weights,
                  static_cast<std::size_t>(blk.up.in_channels) * blk.up.out_channels *
                      layers::kDeconvKernel * layers::kDeconvKernel,
                  std::sqrt(1.0 / fan_in));
    }
    init_conv(dec.head, 1.0);
  }
  return p;
}

template <typename T>
void head_activation(const Tensor<T>& pre, Tensor<T>& out) {
  out = Tensor<T>(pre.channels, pre.height, pre.width);
  const std::size_t plane = pre.plane_size();
  for (int c = 0; c < 3; ++c) {
    const T* z = pre.plane(c);
    T* o = out.plane(c);
    for (std::size_t i = 0; i < plane; ++i) o[i] = std::min(std::max(z[i], T(0)), T(1));
  }
  const T* z = pre.plane(3);
  T* o = out.plane(3);
  for (std::size_t i = 0; i < plane; ++i) o[i] = T(1) / (T(1) + std::exp(-z[i]));
}

namespace {

template <typename T>
Tensor<T> cnr_forward(std::span<const T> params, const ConvNormRelu& l, const Tensor<T>& in,
                      CnrTape<T>* tape) {
  Tensor<T> conv_out, normalized, out;
  std::vector<T> rstd;
  layers::conv3x3_forward(in, params.data() + l.conv.weights, static_cast<const T*>(nullptr),
                          l.conv.out_channels, conv_out);
  layers::group_norm_forward(conv_out, l.norm.groups, params.data() + l.norm.gamma,
                             params.data() + l.norm.beta, normalized, rstd, out);
  check_finite(out, l.conv.name);  // before ReLU, which would map NaN to 0
  layers::relu_inplace(out);
  if (tape) {
    tape->input = in;
    tape->normalized = std::move(normalized);
    tape->rstd = std::move(rstd);
    tape->output = out;
  }
  return out;
}

template <typename T>
Tensor<T> cnr_backward(std::span<const T> params, const ConvNormRelu& l, const CnrTape<T>& tape,
                       Tensor<T> grad, std::span<T> g, bool need_input_grad) {
  layers::relu_backward_inplace(tape.output, grad);
  Tensor<T> grad_conv;
  layers::group_norm_backward(tape.normalized, tape.rstd, l.norm.groups, params.data() + l.norm.gamma,
                              grad, g.data() + l.norm.gamma, g.data() + l.norm.beta, grad_conv);
  Tensor<T> grad_in;
  layers::conv3x3_backward(tape.input, params.data() + l.conv.weights, grad_conv,
                           g.data() + l.conv.weights, static_cast<T*>(nullptr),
                           need_input_grad ? &grad_in : nullptr);
  return grad_in;
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += src.values[i];
}

}  // namespace

template <typename T>
NetworkOutput<T> Network<T>::run(std::span<const T> params, const Tensor<T>& input,
                                 Tape<T>* tape) const {
  if (params.size() != param_count_) {
    throw ConfigError("network: parameter vector has " + std::to_string(params.size()) +
                      " entries, expected " + std::to_string(param_count_));
  }
  if (input.channels != 6 || input.height != config_.patch_size || input.width != config_.patch_size) {
    throw DimensionError("network: expected input 6x" + std::to_string(config_.patch_size) + "x" +
                         std::to_string(config_.patch_size) + ", got " + std::to_string(input.channels) +
                         "x" + std::to_string(input.height) + "x" + std::to_string(input.width));
  }
  if (tape) {
    tape->encoder.assign(kEncoderBlocks, {});
    tape->pool_argmax.assign(kEncoderBlocks, {});
    tape->pool_input_shape.assign(kEncoderBlocks, {});
  }

  std::vector<Tensor<T>> skips(kEncoderBlocks);
  Tensor<T> x = input;
  for (int b = 0; b < kEncoderBlocks; ++b) {
    if (tape) tape->encoder[b].resize(encoder_[b].size());
    for (std::size_t l = 0; l < encoder_[b].size(); ++l) {
      x = cnr_forward(params, encoder_[b][l], x, tape ? &tape->encoder[b][l] : nullptr);
    }
    skips[b] = x;
    Tensor<T> pooled;
    std::vector<std::int32_t> argmax;
    layers::maxpool_forward(x, pooled, argmax);
    if (tape) {
      tape->pool_argmax[b] = std::move(argmax);
      tape->pool_input_shape[b] = {x.height, x.width};
    }
    x = std::move(pooled);
  }

  NetworkOutput<T> result;
  for (int d = 0; d < 2; ++d) {
    const DecoderLayout& dec = decoders_[d];
    DecoderTape<T>* dt = tape ? &tape->decoders[d] : nullptr;
    if (dt) dt->blocks.assign(dec.blocks.size(), {});
    Tensor<T> y = x;
    for (std::size_t k = 0; k < dec.blocks.size(); ++k) {
      const DecoderBlock& blk = dec.blocks[k];
      const int level = kEncoderBlocks - 1 - static_cast<int>(k);
      Tensor<T> r = cnr_forward(params, blk.body, y, dt ? &dt->blocks[k] : nullptr);
      layers::deconv_forward(r, params.data() + blk.up.weights, params.data() + blk.up.bias,
                             blk.up.out_channels, y);
      if (config_.skip_connections) add_inplace(y, skips[level]);
      check_finite(y, blk.up.name);
    }
    Tensor<T> z;
    layers::conv3x3_forward(y, params.data() + dec.head.weights, params.data() + *dec.head.bias, 4, z);
    check_finite(z, dec.head.name);
    head_activation(z, d == 0 ? result.frame1 : result.frame2);
    if (dt) {
      dt->head_input = std::move(y);
      dt->head_pre_activation = std::move(z);
    }
  }
  return result;
}

template <typename T>
NetworkOutput<T> Network<T>::forward(std::span<const T> params, const Tensor<T>& input) const {
  return run(params, input, nullptr);
}

template <typename T>
NetworkOutput<T> Network<T>::forward(std::span<const T> params, const Tensor<T>& input,
                                     Tape<T>& tape) const {
  return run(params, input, &tape);
}

template <typename T>
void Network<T>::backward(std::span<const T> params, const Tape<T>& tape, const Tensor<T>& grad_out1,
                          const Tensor<T>& grad_out2, std::span<T> grad) const {
  if (grad.size() != param_count_) throw ConfigError("network: gradient vector size mismatch");
  std::vector<Tensor<T>> grad_skips(kEncoderBlocks);
  Tensor<T> grad_latent;
  for (int d = 0; d < 2; ++d) {
    const DecoderLayout& dec = decoders_[d];
    const DecoderTape<T>& dt = tape.decoders[d];
    const Tensor<T>& gout = d == 0 ? grad_out1 : grad_out2;

    // Back through the head activation.
    const Tensor<T>& z = dt.head_pre_activation;
    Tensor<T> gz(z.channels, z.height, z.width);
    const std::size_t plane = z.plane_size();
    for (int c = 0; c < 3; ++c) {
      const T* zp = z.plane(c);
      const T* gp = gout.plane(c);
      T* dst = gz.plane(c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = (zp[i] > T(0) && zp[i] < T(1)) ? gp[i] : T(0);
    }
    {
      const T* zp = z.plane(3);
      const T* gp = gout.plane(3);
      T* dst = gz.plane(3);
      for (std::size_t i = 0; i < plane; ++i) {
        const T s = T(1) / (T(1) + std::exp(-zp[i]));
        dst[i] = gp[i] * s * (T(1) - s);
      }
    }
    Tensor<T> gy;
    layers::conv3x3_backward(dt.head_input, params.data() + dec.head.weights, gz,
                             grad.data() + dec.head.weights, grad.data() + *dec.head.bias, &gy);

    for (int k = static_cast<int>(dec.blocks.size()) - 1; k >= 0; --k) {
      const DecoderBlock& blk = dec.blocks[k];
      const int level = kEncoderBlocks - 1 - k;
      if (config_.skip_connections) {
        if (grad_skips[level].values.empty()) grad_skips[level] = gy;
        else add_inplace(grad_skips[level], gy);
      }
      Tensor<T> gr;
      layers::deconv_backward(dt.blocks[k].output, params.data() + blk.up.weights, gy,
                              grad.data() + blk.up.weights, grad.data() + blk.up.bias, gr);
      gy = cnr_backward(params, blk.body, dt.blocks[k], std::move(gr), grad, true);
    }
    if (grad_latent.values.empty()) grad_latent = std::move(gy);
    else add_inplace(grad_latent, gy);
  }

  Tensor<T> gx = std::move(grad_latent);
  for (int b = kEncoderBlocks - 1; b >= 0; --b) {
    Tensor<T> gpool;
    layers::maxpool_backward(gx, tape.pool_argmax[b], tape.pool_input_shape[b].first,
                             tape.pool_input_shape[b].second, gpool);
    if (!grad_skips[b].values.empty()) add_inplace(gpool, grad_skips[b]);
    gx = std::move(gpool);
    for (int l = static_cast<int>(encoder_[b].size()) - 1; l >= 0; --l) {
      const bool first_layer = b == 0 && l == 0;
      gx = cnr_backward(params, encoder_[b][l], tape.encoder[b][l], std::move(gx), grad, !first_layer);
    }
  }
  for (const T v : grad) {
    if (!std::isfinite(v)) throw NumericError("non-finite gradient");
  }
}

template <typename T>
const ParamTensor& Network<T>::parameter_tensor(std::size_t index) const {
  if (index >= param_count_) throw ConfigError("network: parameter index out of range");
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), index,
                             [](std::size_t i, const ParamTensor& r) { return i < r.end; });
  return *it;
}

template <typename T>
std::string Network<T>::parameter_owner(std::size_t index) const {
  const ParamTensor& r = parameter_tensor(index);
  return r.name + "[" + std::to_string(index - r.begin) + "]";
}

template class Network<float>;
template class Network<double>;
template void head_activation<float>(const Tensor<float>&, Tensor<float>&);
template void head_activation<double>(const Tensor<double>&, Tensor<double>&);

}  // namespace duplexmat::net
