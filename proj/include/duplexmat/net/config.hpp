#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace duplexmat::net {

/// Number of 2x poolings in the encoder; patch sizes must be divisible by 2^5.
inline constexpr int kEncoderBlocks = 5;

struct ModelConfig {
  int patch_size = 64;
  int base_width = 8;  ///< channels of the first block; doubles per block
  int group_norm_groups = 8;
  bool skip_connections = true;

  void validate() const;
  std::vector<int> widths() const;  ///< per block, base_width * 2^b
  /// Largest divisor of `channels` not exceeding group_norm_groups.
  int groups_for(int channels) const;
  std::string canonical() const;  ///< stable text form, hashed into checkpoints
  std::uint64_t hash() const;
};

struct LossConfig {
  double alpha_weight = 1.0;
  double color_weight = 0.5;
  double epsilon = 1e-6;
  int inner_border = 50;

  /// Default weights with the 50 px border scaled by patch_size/320.
  static LossConfig scaled_to(int patch_size);
  void validate(int patch_size) const;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.6;
  int patience_decay = 2;
  int patience_stop = 5;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  /// Scale each step's gradient by 1/|inner region| so the rate applies to
  /// the per-pixel mean rather than the pixel sum.
  bool mean_over_pixels = true;

  void validate() const;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace duplexmat::net
