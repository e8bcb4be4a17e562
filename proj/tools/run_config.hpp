#pragma once

#include <map>
#include <string>
#include <vector>

#include "duplexmat/duplexsim.hpp"
#include "duplexmat/metrics.hpp"
#include "duplexmat/net/config.hpp"
#include "duplexmat/synth.hpp"
#include "duplexmat/tiler.hpp"

namespace duplexmat::cli {

struct KeySpec {
  std::string name;
  std::string default_value;  ///< "auto" means derived from other keys
  std::string help;
};

/// Flat key=value configuration. Keys are "section.field"; a file may carry
/// any known key, unknown keys are rejected.
class RunConfig {
public:
  RunConfig();

  static const std::vector<KeySpec>& keys();
  static const KeySpec* find(const std::string& name);

  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);

  const std::string& raw(const std::string& key) const;
  bool is_auto(const std::string& key) const { return raw(key) == "auto"; }
  bool is_set_explicitly(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  Rational get_rational(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Typed views with derived ("auto") values resolved.
  AugmentSpec augment() const;
  net::ModelConfig model() const;
  net::LossConfig loss() const;
  net::TrainConfig train() const;
  TileParams tiles() const;
  DuplexSchedule duplex() const;
  EvaluationConfig evaluation() const;

  /// Writes every key with a prefix in `sections`, auto values resolved.
  std::string resolved_text(const std::string& command, const std::vector<std::string>& sections) const;

private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace duplexmat::cli
