#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "duplexmat/compositor.hpp"
#include "duplexmat/duplexsim.hpp"
#include "duplexmat/errors.hpp"
#include "duplexmat/metrics.hpp"
#include "duplexmat/net/checkpoint.hpp"
#include "duplexmat/net/network.hpp"
#include "duplexmat/net/train.hpp"
#include "duplexmat/parallel.hpp"
#include "duplexmat/png_io.hpp"
#include "duplexmat/synth.hpp"
#include "duplexmat/tiler.hpp"
#include "duplexmat/triangulate.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace duplexmat;
using duplexmat::cli::RunConfig;

namespace {

constexpr Rgb kSequenceGreen{0.f, 1.f, 0.f};
constexpr Rgb kSequencePurple{0.5f, 0.f, 0.5f};
constexpr Rgb kCheckerLight{0.8f, 0.8f, 0.8f};
constexpr Rgb kCheckerDark{0.4f, 0.4f, 0.4f};

// Sections whose keys a command accepts, besides its own path keys.
const std::map<std::string, std::vector<std::string>> kCommandSections = {
    {"synth", {"run", "synth", "model"}},
    {"train", {"run", "model", "loss", "train"}},
    {"infer", {"run", "tiles", "eval", "infer"}},
    {"triangulate", {"run", "triangulate"}},
    {"composite", {"run", "eval", "composite"}},
    {"evaluate", {"run", "eval"}},
    {"simulate-duplex", {"run", "duplex"}},
};

bool is_path_key(const cli::KeySpec& k) { return k.default_value.empty(); }

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

std::string field_of(const std::string& key) { return key.substr(key.find('.') + 1); }

// The section whose path keys appear as plain flags for a command.
std::string own_section(const std::string& command) {
  if (command == "evaluate") return "eval";
  if (command == "simulate-duplex") return "duplex";
  return command;
}

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

struct Invocation {
  std::string command;
  std::string config_file;
  std::map<std::string, std::string> overrides;
  RunConfig config;
};

void register_options(CLI::App* sub, Invocation& inv) {
  const auto& sections = kCommandSections.at(sub->get_name());
  const std::string own = own_section(sub->get_name());
  sub->add_option("--config", inv.config_file, "key = value configuration file; flags override it");
  for (const auto& k : RunConfig::keys()) {
    const std::string sec = section_of(k.name);
    if (std::find(sections.begin(), sections.end(), sec) == sections.end()) continue;
    std::string flag;
    if (sec == own && is_path_key(k)) flag = "--" + dashed(field_of(k.name));
    else if (is_path_key(k)) continue;
    else flag = "--" + k.name;
    if (k.name == "run.seed") flag += ",--seed";
    if (k.name == "run.threads") flag += ",--threads";
    if (k.name == "eval.spill_mode") flag += ",--spill-mode";
    if (k.name == "train.max_epochs") flag += ",--epochs";
    std::string help = k.help;
    if (!k.default_value.empty()) help += " [default: " + k.default_value + "]";
    const std::string key = k.name;
    sub->add_option_function<std::string>(
        flag, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, help);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string require(const RunConfig& cfg, const std::string& key) {
  const std::string v = cfg.get_string(key);
  if (v.empty()) throw ConfigError("missing required option --" + dashed(field_of(key)));
  return v;
}

void write_resolved(const Invocation& inv, const fs::path& dir) {
  const std::string text = inv.config.resolved_text(inv.command, kCommandSections.at(inv.command));
  write_text(dir / (inv.command + "_resolved.cfg"), text);
}

fs::path parent_dir(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.png", i);
  return buf;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError(dir.string() + ": no PNG files");
  return out;
}

// Copies `fg` into a transparent canvas with its top-left corner at (x0,y0).
RgbaForeground place(const RgbaForeground& fg, int width, int height, int x0, int y0) {
  RgbaForeground out(width, height);
  for (int y = 0; y < fg.height(); ++y) {
    const int ty = y + y0;
    if (ty < 0 || ty >= height) continue;
    for (int x = 0; x < fg.width(); ++x) {
      const int tx = x + x0;
      if (tx < 0 || tx >= width) continue;
      for (int c = 0; c < 3; ++c) out.color(tx, ty, c) = fg.color(x, y, c);
      out.alpha(tx, ty) = fg.alpha(x, y);
    }
  }
  return out;
}

ImageRGB side_by_side(const ImageRGB& a, const ImageRGB& b) {
  ImageRGB out(a.width() + b.width(), std::max(a.height(), b.height()));
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) out(x, y, c) = a(x, y, c);
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x)
      for (int c = 0; c < 3; ++c) out(a.width() + x, y, c) = b(x, y, c);
  return out;
}

ImageRGB load_background(const std::string& path, int width, int height, int cell) {
  if (path.empty()) return make_checkerboard(width, height, cell, kCheckerLight, kCheckerDark);
  ImageRGB bg = load_png_rgb(path);
  require_same_size(bg, ImageRGB(width, height), "background");
  return bg;
}

BackingSpec parse_backing(const std::string& text) {
  if (text.rfind("rgb:", 0) == 0) {
    std::vector<float> v;
    std::stringstream ss(text.substr(4));
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        v.push_back(std::stof(part));
      } catch (const std::exception&) {
        throw ConfigError("backing '" + text + "': expected rgb:R,G,B");
      }
    }
    if (v.size() != 3) throw ConfigError("backing '" + text + "': expected rgb:R,G,B");
    for (float x : v)
      if (x < 0.f || x > 1.f) throw ConfigError("backing '" + text + "': components must be in [0,1]");
    return Rgb{v[0], v[1], v[2]};
  }
  return load_png_rgb(text);
}

// synth ---------------------------------------------------------------------

std::string asset_name(const char* prefix, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "assets/%s_%03zu.png", prefix, i);
  return buf;
}

void run_synth(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const fs::path out = require(cfg, "synth.out");
  const AugmentSpec spec = cfg.augment();
  const std::uint64_t seed = cfg.get_u64("run.seed");
  const int threads = cfg.get_int("run.threads");
  fs::create_directories(out / "assets");

  // Asset paths in the manifest are relative to the output directory.
  std::vector<std::string> fgs, bgs;
  std::map<std::string, fs::path> resolve;
  const auto user_fgs = cfg.get_string_list("synth.foregrounds");
  const auto user_bgs = cfg.get_string_list("synth.backgrounds");
  if (user_fgs.empty()) {
    const int n = cfg.get_int("synth.procedural_foregrounds");
    const int size = cfg.get_int("synth.foreground_size");
    for (int i = 0; i < n; ++i) {
      Rng rng(derive_seed(seed, 100, static_cast<std::uint64_t>(i)));
      const std::string name = asset_name("fg", i);
      save_png(make_procedural_foreground(size, size, rng), out / name);
      fgs.push_back(name);
      resolve[name] = out / name;
    }
  } else {
    for (const auto& p : user_fgs) {
      fgs.push_back(p);
      resolve[p] = p;
    }
  }
  if (user_bgs.empty()) {
    const int pairs = cfg.get_int("synth.procedural_background_pairs");
    const int size = cfg.get_int("synth.background_size");
    for (int i = 0; i < pairs; ++i) {
      Rng rng(derive_seed(seed, 101, static_cast<std::uint64_t>(i)));
      std::uniform_real_distribution<float> u(-0.08f, 0.08f);
      const Rgb green{0.15f + u(rng), 0.75f + u(rng), 0.2f + u(rng)};
      const Rgb purple{0.6f + u(rng), 0.15f + u(rng), 0.65f + u(rng)};
      for (int j = 0; j < 2; ++j) {
        const std::string name = asset_name("bg", static_cast<std::size_t>(2 * i + j));
        save_png(make_procedural_backing(size, size, j == 0 ? green : purple, rng), out / name);
        bgs.push_back(name);
        resolve[name] = out / name;
      }
    }
  } else {
    for (const auto& p : user_bgs) {
      bgs.push_back(p);
      resolve[p] = p;
    }
  }

  const TupleCounts counts{static_cast<std::size_t>(cfg.get_int("synth.train_count")),
                           static_cast<std::size_t>(cfg.get_int("synth.val_count"))};
  const auto manifest = build_manifest(fgs, bgs, cfg.get_double("synth.split"), counts, seed);
  write_text(out / "manifest.jsonl", manifest_to_jsonl(manifest));

  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    const ManifestRecord& rec = manifest[i];
    const RgbaForeground fg = load_png_rgba(resolve.at(rec.fg_path));
    const ImageRGB bg1 = load_png_rgb(resolve.at(rec.bg1_path));
    const ImageRGB bg2 = load_png_rgb(resolve.at(rec.bg2_path));
    Rng rng(rec.seed);
    const TrainSample s = sample_pair(fg, bg1, bg2, spec, rng);
    char dir[32];
    std::snprintf(dir, sizeof dir, "%04llu", static_cast<unsigned long long>(rec.index));
    const fs::path d = out / rec.split / dir;
    fs::create_directories(d);
    save_png(s.p1, d / "p1.png");
    save_png(s.p2, d / "p2.png");
    save_png(s.gt1, d / "gt1.png");
    save_png(s.gt2, d / "gt2.png");
    write_text(d / "sample.json", sample_sidecar_json(s, rec));
  });

  const int frames = cfg.get_int("synth.sequence_frames");
  if (frames > 0) {
    const int w = cfg.get_int("synth.sequence_width");
    const int h = cfg.get_int("synth.sequence_height");
    const int motion = cfg.get_int("synth.sequence_motion");
    const bool pure = cfg.get_bool("synth.sequence_pure_backings");
    Rng rng(derive_seed(seed, 102, 0));
    const int fs_w = std::max(8, w * 3 / 5), fs_h = std::max(8, h * 4 / 5);
    const RgbaForeground fg = make_procedural_foreground(fs_w, fs_h, rng);
    const ImageRGB b1 = pure ? make_solid(w, h, kSequenceGreen) : make_procedural_backing(w, h, kSequenceGreen, rng);
    const ImageRGB b2 = pure ? make_solid(w, h, kSequencePurple) : make_procedural_backing(w, h, kSequencePurple, rng);
    const fs::path sd = out / "sequence";
    fs::create_directories(sd / "frames");
    fs::create_directories(sd / "gt");
    save_png(b1, sd / "backing1.png");
    save_png(b2, sd / "backing2.png");
    const int x0 = (w - fs_w) / 2 - motion * frames / 2, y0 = (h - fs_h) / 2;
    for (int n = 0; n < frames; ++n) {
      const RgbaForeground gt = place(fg, w, h, x0 + motion * n, y0);
      save_png(gt, sd / "gt" / frame_name(n));
      save_png(compose(gt, n % 2 == 0 ? b1 : b2), sd / "frames" / frame_name(n));
    }
  }

  write_resolved(inv, out);
  std::cout << "synth: " << counts.train << " train and " << counts.val << " val samples in " << out.string()
            << "\n";
}

// train ---------------------------------------------------------------------

std::vector<net::Sample<float>> load_split(const fs::path& data, const std::vector<ManifestRecord>& manifest,
                                           const std::string& split, int patch, int threads) {
  std::vector<const ManifestRecord*> recs;
  for (const auto& r : manifest)
    if (r.split == split) recs.push_back(&r);
  std::vector<net::Sample<float>> out(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "%04llu", static_cast<unsigned long long>(recs[i]->index));
    const fs::path d = data / split / dir;
    TrainSample s;
    s.p1 = load_png_rgb(d / "p1.png");
    s.p2 = load_png_rgb(d / "p2.png");
    s.gt1 = load_png_rgba(d / "gt1.png");
    s.gt2 = load_png_rgba(d / "gt2.png");
    if (s.p1.width() != patch || s.p1.height() != patch)
      throw DimensionError(d.string() + ": sample size " + std::to_string(s.p1.width()) + " does not match model.patch_size " +
                           std::to_string(patch));
    out[i] = net::to_network_sample(s);
  });
  return out;
}

void run_train(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const fs::path data = require(cfg, "train.data");
  const fs::path out = require(cfg, "train.out");
  const net::ModelConfig model = cfg.model();
  const net::LossConfig loss = cfg.loss();
  const net::TrainConfig tc = cfg.train();
  const int threads = cfg.get_int("run.threads");

  const auto manifest = manifest_from_jsonl(read_text(data / "manifest.jsonl"));
  const auto train_set = load_split(data, manifest, "train", model.patch_size, threads);
  const auto val_set = load_split(data, manifest, "val", model.patch_size, threads);
  if (train_set.empty() || val_set.empty()) throw ConfigError("train: dataset needs train and val samples");

  const net::Network<float> net(model);
  net::TrainState state = net::initial_state(net, tc);
  if (const std::string resume = cfg.get_string("train.resume"); !resume.empty()) {
    net::Checkpoint ck = net::load_checkpoint(resume);
    if (ck.model.canonical() != model.canonical())
      throw ConfigError("train: --resume checkpoint model differs from the configured model");
    state = std::move(ck.state);
  }

  std::ostringstream history;
  history << "epoch,train_loss,val_loss,learning_rate,restored,stagnant\n";
  history.precision(17);
  auto on_epoch = [&](const net::EpochRecord& r, const net::TrainState&) {
    history << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.learning_rate << ','
            << (r.restored ? 1 : 0) << ',' << r.stagnant << '\n';
    std::cout << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss << " lr "
              << r.learning_rate << (r.restored ? " restored" : "") << "\n";
    return true;
  };
  const net::TrainResult result = net::train(net, std::move(state), train_set, val_set, loss, tc, threads, on_epoch);

  net::save_checkpoint(out, net::Checkpoint{model, loss, tc, result.state});
  fs::path hist = out;
  hist.replace_extension(".history.csv");
  write_text(hist, history.str());
  write_resolved(inv, parent_dir(out));
  std::cout << "train: " << net::to_string(result.status) << " after " << result.state.epoch << " epochs\n";
  if (result.status == net::TrainStatus::Diverged)
    throw NumericError("training diverged (" + result.message + "); last good parameters saved");
}

// infer ---------------------------------------------------------------------

void run_infer(Invocation& inv) {
  RunConfig& cfg = inv.config;
  const net::Checkpoint ck = net::load_checkpoint(require(cfg, "infer.checkpoint"));
  cfg.set("model.patch_size", std::to_string(ck.model.patch_size));
  const TileParams tiles = cfg.tiles();
  const int threads = cfg.get_int("run.threads");
  const SpillBlendMode mode = cfg.evaluation().spill_mode;
  const net::Network<float> net(ck.model);
  const PairPredictor predictor = net::network_predictor(net, ck.state.params);
  const std::string bg_path = cfg.get_string("infer.composite_bg");

  auto composite = [&](const RgbaForeground& pred, const ImageRGB& frame, const fs::path& rgba_path) {
    if (bg_path.empty()) return;
    const ImageRGB bg = load_background(bg_path, frame.width(), frame.height(), 1);
    fs::path p = rgba_path;
    p.replace_filename(rgba_path.stem().string() + "_composite.png");
    save_png(compose_spill_corrected(pred, frame, bg, mode), p);
  };

  const std::string frames_dir = cfg.get_string("infer.frames_dir");
  if (!frames_dir.empty()) {
    const fs::path out = require(cfg, "infer.out_dir");
    fs::create_directories(out);
    const auto frames = list_pngs(frames_dir);
    if (frames.size() % 2 != 0)
      std::cerr << "infer: odd frame count, " << frames.back().filename().string() << " left unprocessed\n";
    for (std::size_t i = 0; i + 1 < frames.size(); i += 2) {
      const ImageRGB f1 = load_png_rgb(frames[i]), f2 = load_png_rgb(frames[i + 1]);
      const auto [o1, o2] = infer_frame_pair(predictor, f1, f2, tiles, threads);
      save_png(o1, out / frames[i].filename());
      save_png(o2, out / frames[i + 1].filename());
      composite(o1, f1, out / frames[i].filename());
      composite(o2, f2, out / frames[i + 1].filename());
    }
    write_resolved(inv, out);
    std::cout << "infer: " << frames.size() / 2 << " pairs written to " << out.string() << "\n";
    return;
  }
  const ImageRGB f1 = load_png_rgb(require(cfg, "infer.frame1"));
  const ImageRGB f2 = load_png_rgb(require(cfg, "infer.frame2"));
  const fs::path out1 = require(cfg, "infer.out1"), out2 = require(cfg, "infer.out2");
  const auto [o1, o2] = infer_frame_pair(predictor, f1, f2, tiles, threads);
  fs::create_directories(parent_dir(out1));
  fs::create_directories(parent_dir(out2));
  save_png(o1, out1);
  save_png(o2, out2);
  composite(o1, f1, out1);
  composite(o2, f2, out2);
  write_resolved(inv, parent_dir(out1));
  std::cout << "infer: wrote " << out1.string() << " and " << out2.string() << "\n";
}

// triangulate ---------------------------------------------------------------

void run_triangulate(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const BackingSpec b1 = parse_backing(require(cfg, "triangulate.backing1"));
  const BackingSpec b2 = parse_backing(require(cfg, "triangulate.backing2"));
  const std::string frames_dir = cfg.get_string("triangulate.frames_dir");
  if (!frames_dir.empty()) {
    const fs::path out = require(cfg, "triangulate.out_dir");
    fs::create_directories(out);
    const auto frames = list_pngs(frames_dir);
    // Every frame pair shares one matte, written under both frame names.
    std::vector<std::size_t> pairs;
    for (std::size_t i = 0; i + 1 < frames.size(); i += 2) pairs.push_back(i);
    parallel_for(pairs.size(), cfg.get_int("run.threads"), [&](std::size_t k) {
      const std::size_t i = pairs[k];
      const RgbaForeground m = triangulate_frame(load_png_rgb(frames[i]), load_png_rgb(frames[i + 1]), b1, b2);
      save_png(m, out / frames[i].filename());
      save_png(m, out / frames[i + 1].filename());
    });
    write_resolved(inv, out);
    std::cout << "triangulate: " << pairs.size() << " pairs written to " << out.string() << "\n";
    return;
  }
  const fs::path out = require(cfg, "triangulate.out_rgba");
  const RgbaForeground m = triangulate_frame(load_png_rgb(require(cfg, "triangulate.frame1")),
                                             load_png_rgb(require(cfg, "triangulate.frame2")), b1, b2);
  fs::create_directories(parent_dir(out));
  save_png(m, out);
  write_resolved(inv, parent_dir(out));
  std::cout << "triangulate: wrote " << out.string() << "\n";
}

// composite -----------------------------------------------------------------

void run_composite(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const RgbaForeground fg = load_png_rgba(require(cfg, "composite.fg"));
  const fs::path out = require(cfg, "composite.out");
  const ImageRGB bg = load_background(cfg.get_string("composite.bg"), fg.width(), fg.height(),
                                      cfg.get_int("eval.checker_cell"));
  const std::string orig = cfg.get_string("composite.orig");
  ImageRGB result;
  if (orig.empty()) result = compose(fg, bg);
  else result = compose_spill_corrected(fg, load_png_rgb(orig), bg, cfg.evaluation().spill_mode);
  fs::create_directories(parent_dir(out));
  save_png(result, out);
  if (const std::string tri = cfg.get_string("composite.trimap_out"); !tri.empty()) {
    const Trimap t = trimap_from_alpha(fg.alpha, cfg.get_int("eval.trimap_radius"));
    AlphaMatte img(t.width(), t.height());
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) img(x, y) = static_cast<float>(t(x, y)) / 255.f;
    save_png(img, tri, BitDepth::Eight);
  }
  write_resolved(inv, parent_dir(out));
  std::cout << "composite: wrote " << out.string() << "\n";
}

// evaluate ------------------------------------------------------------------

void run_evaluate(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const auto pred_paths = list_pngs(require(cfg, "eval.pred_dir"));
  const fs::path out = require(cfg, "eval.out");
  std::vector<RgbaForeground> pred;
  for (const auto& p : pred_paths) pred.push_back(load_png_rgba(p));

  std::optional<std::vector<RgbaForeground>> gt;
  if (const std::string gd = cfg.get_string("eval.gt_dir"); !gd.empty()) {
    gt.emplace();
    for (const auto& p : pred_paths) gt->push_back(load_png_rgba(fs::path(gd) / p.filename()));
  }
  std::vector<ImageRGB> orig;
  const std::string od = cfg.get_string("eval.orig_dir");
  if (!od.empty())
    for (const auto& p : pred_paths) orig.push_back(load_png_rgb(fs::path(od) / p.filename()));

  const ImageRGB bg = load_background(cfg.get_string("eval.bg"), pred.front().width(), pred.front().height(),
                                      cfg.get_int("eval.checker_cell"));
  const EvaluationConfig ec = cfg.evaluation();
  const MetricReport report = evaluate_sequence(pred, gt, bg, ec, od.empty() ? nullptr : &orig);
  write_text(out, report_to_json(report) + "\n");

  if (const std::string strip = cfg.get_string("eval.strip_dir"); !strip.empty()) {
    fs::create_directories(strip);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const ImageRGB p = od.empty() ? compose(pred[i], bg) : compose_spill_corrected(pred[i], orig[i], bg, ec.spill_mode);
      const ImageRGB left = gt ? compose((*gt)[i], bg) : (od.empty() ? bg : orig[i]);
      save_png(side_by_side(left, p), fs::path(strip) / pred_paths[i].filename(), BitDepth::Eight);
    }
  }
  write_resolved(inv, parent_dir(out));
  std::cout << report_to_json(report) << "\n";
}

// simulate-duplex -----------------------------------------------------------

void run_simulate(Invocation& inv) {
  const RunConfig& cfg = inv.config;
  const fs::path csv = require(cfg, "duplex.out_csv");
  const DuplexSchedule s = cfg.duplex();
  const Rational step =
      cfg.is_auto("duplex.row_time_step") ? s.exposure / Rational(s.scan_ratio) : cfg.get_rational("duplex.row_time_step");
  const Timeline tl = simulate(s, cfg.get_rational("duplex.duration"), step);
  write_text(csv, timeline_csv(tl));
  write_resolved(inv, parent_dir(csv));

  bool ok = true;
  std::cout << "frames " << tl.frame_count << "\n";
  for (int f = 0; f < tl.frame_count; ++f) {
    const CameraView v = camera_view(tl, f);
    std::string phases;
    for (const auto& p : v.phases) phases += (phases.empty() ? "" : "+") + p;
    std::cout << "frame " << f << " open " << v.open.str() << " close " << v.close.str() << " sees " << phases
              << (v.sync_violation ? " SYNC-VIOLATION" : "") << "\n";
  }
  for (const PhaseShare& p : phase_histogram(tl))
    std::cout << "share " << p.phase << " " << p.fraction.str() << " (" << p.time.str() << " ms)\n";
  for (const InvariantCheck& c : verify(tl)) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    ok = ok && c.pass;
  }
  std::cout << "verdict " << (ok ? "PASS" : "FAIL") << "\n";
  if (!ok) throw NumericError("duplex schedule violates at least one invariant");
}

int report_error(const char* kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-backdrop matting toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");
  Invocation inv;

  const std::map<std::string, std::pair<std::string, std::function<void(Invocation&)>>> commands = {
      {"synth", {"Render a synthetic dual-frame training set", run_synth}},
      {"train", {"Train the matting network on a synth dataset", run_train}},
      {"infer", {"Tiled network inference on a frame pair or a frame sequence", run_infer}},
      {"triangulate", {"Exact two-backing matting", run_triangulate}},
      {"composite", {"Composite an RGBA foreground over a background", run_composite}},
      {"evaluate", {"Score predictions against ground truth", run_evaluate}},
      {"simulate-duplex", {"Simulate a time-duplex studio schedule", run_simulate}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    register_options(sub, inv);
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config", e.what(), 2);
  }

  for (const auto& [name, sub] : subs)
    if (sub->parsed()) inv.command = name;

  try {
    if (!inv.config_file.empty()) inv.config.load_file(inv.config_file);
    for (const auto& [k, v] : inv.overrides) inv.config.set(k, v);
    commands.at(inv.command).second(inv);
  } catch (const IoError& e) {
    return report_error("io", e.what(), 3);
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), 2);
  } catch (const NumericError& e) {
    return report_error("numeric", e.what(), 4);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
