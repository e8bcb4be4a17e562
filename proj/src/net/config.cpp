#include "duplexmat/net/config.hpp"

#include <cmath>

#include "duplexmat/errors.hpp"

namespace duplexmat::net {

void ModelConfig::validate() const {
  if (patch_size <= 0 || patch_size % (1 << kEncoderBlocks) != 0) {
    throw ConfigError("model: patch_size must be a positive multiple of 32 (got " +
                      std::to_string(patch_size) + ")");
  }
  if (base_width < 1) throw ConfigError("model: base_width >= 1 violated");
  if (group_norm_groups < 1) throw ConfigError("model: group_norm_groups >= 1 violated");
}

std::vector<int> ModelConfig::widths() const {
  std::vector<int> w;
  for (int b = 0; b < kEncoderBlocks; ++b) w.push_back(base_width << b);
  return w;
}

int ModelConfig::groups_for(int channels) const {
  int g = std::min(group_norm_groups, channels);
  while (channels % g != 0) --g;
  return g;
}

std::string ModelConfig::canonical() const {
  return "patch_size=" + std::to_string(patch_size) + ";base_width=" + std::to_string(base_width) +
         ";group_norm_groups=" + std::to_string(group_norm_groups) +
         ";skip_connections=" + (skip_connections ? "1" : "0") + ";arch=enc22333-dual-dec-v1";
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t ModelConfig::hash() const { return fnv1a64(canonical()); }

LossConfig LossConfig::scaled_to(int patch_size) {
  LossConfig c;
  c.inner_border = static_cast<int>(std::lround(50.0 * patch_size / 320.0));
  return c;
}

void LossConfig::validate(int patch_size) const {
  if (alpha_weight < 0.0 || color_weight < 0.0) throw ConfigError("loss: weights >= 0 violated");
  if (!(epsilon > 0.0)) throw ConfigError("loss: epsilon > 0 violated");
  if (inner_border < 0 || 2 * inner_border >= patch_size) {
    throw ConfigError("loss: 0 <= 2*inner_border < patch_size violated");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate > 0 violated");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum in [0,1) violated");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay in (0,1] violated");
  if (patience_decay < 1 || patience_stop < 1) throw ConfigError("train: patience values must be positive");
  if (patience_decay >= patience_stop) throw ConfigError("train: patience_decay < patience_stop violated");
  if (max_epochs < 1) throw ConfigError("train: max_epochs >= 1 violated");
}

}  // namespace duplexmat::net
