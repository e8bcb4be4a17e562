#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "duplexmat/errors.hpp"

namespace duplexmat::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (int x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

}  // namespace

const std::vector<KeySpec>& RunConfig::keys() {
  static const std::vector<KeySpec> k = {
      {"run.seed", "0", "base seed for every random stream"},
      {"run.threads", "1", "worker threads for data-parallel stages"},

      {"synth.output_size", "auto", "sample patch size (auto: model.patch_size)"},
      {"synth.max_displacement", "auto", "max per-axis displacement of foreground and cutout, source px (auto: 50 scaled by output_size/320)"},
      {"synth.crop_sizes", "auto", "comma list of square crop sizes (auto: 320,480,640 scaled by output_size/320)"},
      {"synth.inner_border", "auto", "loss-free patch margin (auto: 50 scaled by output_size/320)"},
      {"synth.flip_probability", "0.5", "probability of a horizontal flip"},
      {"synth.contrast_min", "0.9", "lower contrast factor"},
      {"synth.contrast_max", "1.1", "upper contrast factor"},
      {"synth.jitter_amplitude", "0.02", "additive per-channel color jitter bound"},
      {"synth.split", "0.8", "training fraction of the asset pools"},
      {"synth.train_count", "16", "training tuples to materialize"},
      {"synth.val_count", "4", "validation tuples to materialize"},
      {"synth.foregrounds", "", "comma list of RGBA foreground PNGs (empty: procedural)"},
      {"synth.backgrounds", "", "comma list of backing frames, consecutive pairs alternate (empty: procedural)"},
      {"synth.procedural_foregrounds", "6", "procedural foregrounds when none are given"},
      {"synth.procedural_background_pairs", "4", "procedural backing pairs when none are given"},
      {"synth.foreground_size", "96", "procedural foreground edge length"},
      {"synth.background_size", "192", "procedural backing edge length"},
      {"synth.sequence_frames", "0", "frames of an evaluation sequence to render (0: none)"},
      {"synth.sequence_width", "160", "evaluation sequence width"},
      {"synth.sequence_height", "120", "evaluation sequence height"},
      {"synth.sequence_motion", "0", "foreground shift per frame in px (x)"},
      {"synth.sequence_pure_backings", "false", "use noiseless constant backings for the sequence"},
      {"synth.out", "", "output directory"},

      {"model.patch_size", "64", "network patch size, multiple of 32 (full scale: 320)"},
      {"model.base_width", "8", "channels of the first encoder block, doubling per block (full scale: 64)"},
      {"model.group_norm_groups", "8", "upper bound on group-norm groups"},
      {"model.skip_connections", "true", "additive encoder-to-decoder skips"},

      {"loss.alpha_weight", "1", "weight of the alpha Charbonnier terms"},
      {"loss.color_weight", "0.5", "weight of each masked color channel term"},
      {"loss.epsilon", "1e-6", "Charbonnier epsilon"},
      {"loss.inner_border", "auto", "loss-free margin (auto: 50 scaled by model.patch_size/320)"},

      {"train.learning_rate", "0.01", "initial SGD learning rate"},
      {"train.momentum", "0.9", "SGD momentum"},
      {"train.lr_decay", "0.6", "rate multiplier per patience_decay stagnant epochs"},
      {"train.patience_decay", "2", "stagnant epochs per rate decay"},
      {"train.patience_stop", "5", "stagnant epochs before stopping"},
      {"train.max_epochs", "50", "epoch limit"},
      {"train.mean_over_pixels", "true", "apply the rate to the per-pixel mean gradient"},
      {"train.data", "", "dataset directory written by synth"},
      {"train.out", "", "checkpoint path"},
      {"train.resume", "", "checkpoint to continue from"},

      {"tiles.inner_size", "auto", "inner region edge (auto: 220 scaled by model.patch_size/320)"},
      {"tiles.inner_overlap", "auto", "overlap of neighbouring inner regions (auto: 50 scaled)"},

      {"infer.checkpoint", "", "trained checkpoint"},
      {"infer.frame1", "", "first frame of a pair"},
      {"infer.frame2", "", "second frame of a pair"},
      {"infer.out1", "", "RGBA output for frame 1"},
      {"infer.out2", "", "RGBA output for frame 2"},
      {"infer.frames_dir", "", "directory of frame_NNNN.png processed in pairs (2i, 2i+1)"},
      {"infer.out_dir", "", "output directory for --frames-dir"},
      {"infer.composite_bg", "", "background PNG for spill-corrected composites"},

      {"triangulate.frame1", "", "frame over backing 1"},
      {"triangulate.frame2", "", "frame over backing 2"},
      {"triangulate.backing1", "", "backing 1: PNG path or rgb:R,G,B"},
      {"triangulate.backing2", "", "backing 2: PNG path or rgb:R,G,B"},
      {"triangulate.out_rgba", "", "RGBA output"},
      {"triangulate.frames_dir", "", "directory of frame_NNNN.png, even frames over backing 1"},
      {"triangulate.out_dir", "", "output directory for --frames-dir"},

      {"composite.fg", "", "RGBA foreground PNG"},
      {"composite.bg", "", "background PNG (empty: checkerboard)"},
      {"composite.orig", "", "camera frame for spill-corrected blending (empty: matting equation)"},
      {"composite.out", "", "composited RGB output"},
      {"composite.trimap_out", "", "optional trimap PNG derived from the foreground alpha"},

      {"eval.pred_dir", "", "directory of predicted RGBA PNGs"},
      {"eval.gt_dir", "", "directory of ground-truth RGBA PNGs (empty: MAD only)"},
      {"eval.orig_dir", "", "camera frames behind the predictions (enables spill-corrected composites)"},
      {"eval.bg", "", "background PNG (empty: checkerboard)"},
      {"eval.out", "", "JSON report path"},
      {"eval.strip_dir", "", "optional directory for side-by-side composite strips"},
      {"eval.gradient_sigma", "1.4", "Gaussian-derivative sigma of the gradient error"},
      {"eval.spill_mode", "text_semantics", "spill blend: text_semantics or verbatim_eq4"},
      {"eval.checker_cell", "16", "checkerboard cell size"},
      {"eval.trimap_radius", "10", "trimap dilation radius"},
      {"eval.sequence_name", "sequence", "name recorded in the report"},

      {"duplex.fps", "100", "camera frame rate (Hz)"},
      {"duplex.exposure", "1", "exposure per frame (ms)"},
      {"duplex.blanking", "9", "blanking per frame (ms)"},
      {"duplex.panel_rows", "32", "LED panel rows"},
      {"duplex.scan_ratio", "8", "multiplexing ratio 1:N"},
      {"duplex.sequence", "keying-green,vfx,keying-blue,vfx", "displayed phase cycle"},
      {"duplex.shutter_offset", "0", "shutter delay against the display cycle (ms)"},
      {"duplex.duration", "40", "simulated time (ms)"},
      {"duplex.row_time_step", "auto", "time one row group stays lit (auto: exposure/scan_ratio)"},
      {"duplex.out_csv", "", "timeline CSV path"},
  };
  return k;
}

const KeySpec* RunConfig::find(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find(key)) throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = value;
  explicit_[key] = true;
}

void RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key == "command") continue;
    if (!find(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    set(key, trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  parse_text(ss.str(), path);
}

const std::string& RunConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

bool RunConfig::is_set_explicitly(const std::string& key) const { return explicit_.contains(key); }

std::string RunConfig::get_string(const std::string& key) const { return raw(key); }

int RunConfig::get_int(const std::string& key) const {
  const std::string& s = raw(key);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& s = raw(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = raw(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = raw(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

Rational RunConfig::get_rational(const std::string& key) const {
  try {
    return Rational::parse(raw(key));
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& part : split(raw(key), ',')) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size())
      throw ConfigError(key + ": expected a comma list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key) const { return split(raw(key), ','); }

AugmentSpec RunConfig::augment() const {
  const int out = is_auto("synth.output_size") ? model().patch_size : get_int("synth.output_size");
  AugmentSpec s = AugmentSpec::scaled_to(out);
  if (!is_auto("synth.max_displacement")) s.max_displacement = get_int("synth.max_displacement");
  if (!is_auto("synth.crop_sizes")) s.crop_sizes = get_int_list("synth.crop_sizes");
  if (!is_auto("synth.inner_border")) s.inner_border = get_int("synth.inner_border");
  s.flip_probability = get_double("synth.flip_probability");
  s.contrast_min = get_double("synth.contrast_min");
  s.contrast_max = get_double("synth.contrast_max");
  s.jitter_amplitude = get_double("synth.jitter_amplitude");
  s.seed = get_u64("run.seed");
  s.validate();
  return s;
}

net::ModelConfig RunConfig::model() const {
  net::ModelConfig m;
  m.patch_size = get_int("model.patch_size");
  m.base_width = get_int("model.base_width");
  m.group_norm_groups = get_int("model.group_norm_groups");
  m.skip_connections = get_bool("model.skip_connections");
  m.validate();
  return m;
}

net::LossConfig RunConfig::loss() const {
  const int patch = model().patch_size;
  net::LossConfig l = net::LossConfig::scaled_to(patch);
  l.alpha_weight = get_double("loss.alpha_weight");
  l.color_weight = get_double("loss.color_weight");
  l.epsilon = get_double("loss.epsilon");
  if (!is_auto("loss.inner_border")) l.inner_border = get_int("loss.inner_border");
  l.validate(patch);
  return l;
}

net::TrainConfig RunConfig::train() const {
  net::TrainConfig t;
  t.learning_rate = get_double("train.learning_rate");
  t.momentum = get_double("train.momentum");
  t.lr_decay = get_double("train.lr_decay");
  t.patience_decay = get_int("train.patience_decay");
  t.patience_stop = get_int("train.patience_stop");
  t.max_epochs = get_int("train.max_epochs");
  t.mean_over_pixels = get_bool("train.mean_over_pixels");
  t.seed = get_u64("run.seed");
  t.validate();
  return t;
}

TileParams RunConfig::tiles() const {
  TileParams p = TileParams::scaled_to(model().patch_size);
  if (!is_auto("tiles.inner_size")) p.inner_size = get_int("tiles.inner_size");
  if (!is_auto("tiles.inner_overlap")) p.inner_overlap = get_int("tiles.inner_overlap");
  p.validate();
  return p;
}

DuplexSchedule RunConfig::duplex() const {
  DuplexSchedule s;
  s.fps = get_rational("duplex.fps");
  s.exposure = get_rational("duplex.exposure");
  s.blanking = get_rational("duplex.blanking");
  s.panel_rows = get_int("duplex.panel_rows");
  s.scan_ratio = get_int("duplex.scan_ratio");
  s.sequence = get_string_list("duplex.sequence");
  s.shutter_offset = get_rational("duplex.shutter_offset");
  validate(s);
  return s;
}

EvaluationConfig RunConfig::evaluation() const {
  EvaluationConfig e;
  e.gradient_sigma = get_double("eval.gradient_sigma");
  if (!(e.gradient_sigma > 0.0)) throw ConfigError("eval.gradient_sigma > 0 violated");
  e.spill_mode = parse_spill_mode(get_string("eval.spill_mode"));
  e.sequence_name = get_string("eval.sequence_name");
  return e;
}

std::string RunConfig::resolved_text(const std::string& command, const std::vector<std::string>& sections) const {
  auto wanted = [&](const std::string& key) {
    const std::string section = key.substr(0, key.find('.'));
    return std::find(sections.begin(), sections.end(), section) != sections.end();
  };
  auto resolved = [&](const std::string& key) -> std::string {
    if (!is_auto(key)) return raw(key);
    if (key == "synth.output_size") return std::to_string(augment().output_size);
    if (key == "synth.max_displacement") return std::to_string(augment().max_displacement);
    if (key == "synth.crop_sizes") return join(augment().crop_sizes);
    if (key == "synth.inner_border") return std::to_string(augment().inner_border);
    if (key == "loss.inner_border") return std::to_string(loss().inner_border);
    if (key == "tiles.inner_size") return std::to_string(tiles().inner_size);
    if (key == "tiles.inner_overlap") return std::to_string(tiles().inner_overlap);
    if (key == "duplex.row_time_step") {
      const DuplexSchedule s = duplex();
      return (s.exposure / Rational(s.scan_ratio)).str();
    }
    return raw(key);
  };
  std::string out = "# resolved configuration\ncommand = " + command + "\n";
  std::string current;
  for (const auto& k : keys()) {
    if (!wanted(k.name)) continue;
    const std::string section = k.name.substr(0, k.name.find('.'));
    if (section != current) {
      out += "\n";
      current = section;
    }
    out += k.name + " = " + resolved(k.name) + "\n";
  }
  return out;
}

}  // namespace duplexmat::cli
