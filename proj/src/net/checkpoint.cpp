#include "duplexmat/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "duplexmat/errors.hpp"

namespace duplexmat::net {

namespace {

constexpr char kMagic[8] = {'D', 'X', 'M', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename V>
void write_pod(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in, const std::string& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw IoError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json meta;
  meta["model"] = {{"patch_size", ckpt.model.patch_size},
                   {"base_width", ckpt.model.base_width},
                   {"group_norm_groups", ckpt.model.group_norm_groups},
                   {"skip_connections", ckpt.model.skip_connections}};
  meta["model_hash"] = ckpt.model.hash();
  meta["loss"] = {{"alpha_weight", ckpt.loss.alpha_weight},
                  {"color_weight", ckpt.loss.color_weight},
                  {"epsilon", ckpt.loss.epsilon},
                  {"inner_border", ckpt.loss.inner_border}};
  meta["train"] = {{"learning_rate", ckpt.train.learning_rate},
                   {"momentum", ckpt.train.momentum},
                   {"lr_decay", ckpt.train.lr_decay},
                   {"patience_decay", ckpt.train.patience_decay},
                   {"patience_stop", ckpt.train.patience_stop},
                   {"max_epochs", ckpt.train.max_epochs},
                   {"seed", ckpt.train.seed},
                   {"mean_over_pixels", ckpt.train.mean_over_pixels}};
  meta["epoch"] = ckpt.state.epoch;
  meta["current_learning_rate"] = ckpt.state.learning_rate;
  meta["param_count"] = ckpt.state.params.size();
  if (ckpt.state.momentum.size() != ckpt.state.params.size())
    throw ConfigError("checkpoint: momentum and parameter lengths differ");

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  const std::string text = meta.dump();
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(ckpt.state.params.data()),
            static_cast<std::streamsize>(ckpt.state.params.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(ckpt.state.momentum.data()),
            static_cast<std::streamsize>(ckpt.state.momentum.size() * sizeof(float)));
  if (!out) throw IoError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(name + ": cannot open checkpoint");
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError(name + ": not a checkpoint file");
  const auto version = read_pod<std::uint32_t>(in, name);
  if (version != kCheckpointVersion)
    throw IoError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = read_pod<std::uint64_t>(in, name);
  if (meta_len > (1u << 24)) throw IoError(name + ": implausible metadata length");
  std::string text(meta_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(meta_len))) throw IoError(name + ": truncated checkpoint");

  Checkpoint c;
  try {
    const auto meta = nlohmann::json::parse(text);
    const auto& m = meta.at("model");
    c.model.patch_size = m.at("patch_size").get<int>();
    c.model.base_width = m.at("base_width").get<int>();
    c.model.group_norm_groups = m.at("group_norm_groups").get<int>();
    c.model.skip_connections = m.at("skip_connections").get<bool>();
    if (meta.at("model_hash").get<std::uint64_t>() != c.model.hash())
      throw ConfigError(name + ": model config hash mismatch");
    const auto& l = meta.at("loss");
    c.loss.alpha_weight = l.at("alpha_weight").get<double>();
    c.loss.color_weight = l.at("color_weight").get<double>();
    c.loss.epsilon = l.at("epsilon").get<double>();
    c.loss.inner_border = l.at("inner_border").get<int>();
    const auto& t = meta.at("train");
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.momentum = t.at("momentum").get<double>();
    c.train.lr_decay = t.at("lr_decay").get<double>();
    c.train.patience_decay = t.at("patience_decay").get<int>();
    c.train.patience_stop = t.at("patience_stop").get<int>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.mean_over_pixels = t.at("mean_over_pixels").get<bool>();
    c.state.epoch = meta.at("epoch").get<int>();
    c.state.learning_rate = meta.at("current_learning_rate").get<double>();
    const auto count = meta.at("param_count").get<std::size_t>();
    c.model.validate();
    const Network<float> net(c.model);
    if (count != net.param_count())
      throw ConfigError(name + ": parameter count " + std::to_string(count) + " does not match the model (" +
                        std::to_string(net.param_count()) + ")");
    c.state.params.resize(count);
    c.state.momentum.resize(count);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(name + ": malformed checkpoint metadata: " + e.what());
  }
  const auto bytes = static_cast<std::streamsize>(c.state.params.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(c.state.params.data()), bytes) ||
      !in.read(reinterpret_cast<char*>(c.state.momentum.data()), bytes))
    throw IoError(name + ": truncated checkpoint payload");
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(name + ": trailing bytes after payload");
  return c;
}

}  // namespace duplexmat::net
