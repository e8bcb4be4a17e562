#pragma once

#include <filesystem>
#include <string>

#include "duplexmat/net/config.hpp"
#include "duplexmat/net/train.hpp"

namespace duplexmat::net {

/// Binary container: magic "DXMCKPT1", u32 format version, u64 metadata
/// length, JSON metadata, then params and momentum as little-endian float32.
struct Checkpoint {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  TrainState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Rejects files whose stored config hash does not match the stored config or
/// whose vector lengths do not match the network built from that config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace duplexmat::net
