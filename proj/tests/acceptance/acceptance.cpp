// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "duplexmat/compositor.hpp"
#include "duplexmat/duplexsim.hpp"
#include "duplexmat/metrics.hpp"
#include "duplexmat/net/gradcheck.hpp"
#include "duplexmat/net/loss.hpp"
#include "duplexmat/net/train.hpp"
#include "duplexmat/synth.hpp"
#include "duplexmat/tiler.hpp"
#include "duplexmat/triangulate.hpp"

namespace fs = std::filesystem;
using namespace duplexmat;

namespace {

// Pinned tolerances and limits.
constexpr double kTriangulationTol = 1e-6;
constexpr double kTriangulationSeconds = 1.0;
constexpr double kPureBackingSeconds = 30.0;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradSeconds = 120.0;
constexpr double kLossFloorRelTol = 1e-6;
constexpr double kOverfitMae = 0.05;
constexpr int kOverfitEpochs = 500;
constexpr double kOverfitSeconds = 15 * 60.0;
constexpr double kUnityTol = 1e-6;
constexpr double kFusionTol = 1e-6;
constexpr double kBlendTol = 1e-6;
constexpr double kMadTol = 1e-9;
constexpr double kSmokeSeconds = 20 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 -------------------------------------------------------------------------

Outcome triangulation_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_alpha = 0.0, worst_fg = 0.0;
  for (int n = 0; n < 1000; ++n) {
    Vec3 b1, b2, fg;
    double d2 = 0.0;
    do {
      d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        b1[c] = u(rng);
        b2[c] = u(rng);
        d2 += (b1[c] - b2[c]) * (b1[c] - b2[c]);
      }
    } while (d2 < 0.1);
    const double a = 0.1 + 0.9 * u(rng);
    for (double& v : fg) v = u(rng);
    Vec3 c1, c2;
    for (int c = 0; c < 3; ++c) {
      c1[c] = a * fg[c] + (1 - a) * b1[c];
      c2[c] = a * fg[c] + (1 - a) * b2[c];
    }
    const PixelMatte m = triangulate_pixel(c1, c2, b1, b2);
    worst_alpha = std::max(worst_alpha, std::abs(m.alpha - a));
    for (int c = 0; c < 3; ++c) worst_fg = std::max(worst_fg, std::abs(m.fg[c] - fg[c]));
  }
  const double t = seconds_since(t0);
  return {worst_alpha <= kTriangulationTol && worst_fg <= kTriangulationTol && t < kTriangulationSeconds,
          "max |da| " + fmt("%.2e", worst_alpha) + ", max |dF| " + fmt("%.2e", worst_fg) + ", " + fmt("%.3f s", t)};
}

// 2 -------------------------------------------------------------------------

Outcome two_backing_pure() {
  const auto t0 = Clock::now();
  constexpr int w = 640, h = 360, frames = 6;
  Rng rng(202);
  const RgbaForeground blob = make_procedural_foreground(360, 300, rng);
  RgbaForeground fg(w, h);
  for (int y = 0; y < blob.height(); ++y)
    for (int x = 0; x < blob.width(); ++x) {
      for (int c = 0; c < 3; ++c) fg.color(140 + x, 30 + y, c) = blob.color(x, y, c);
      fg.alpha(140 + x, 30 + y) = blob.alpha(x, y);
    }
  const Rgb green{0.f, 1.f, 0.f}, purple{0.5f, 0.f, 0.5f};
  const ImageRGB g = make_solid(w, h, green), p = make_solid(w, h, purple);
  std::vector<RgbaForeground> pred, gt;
  for (int n = 0; n < frames; n += 2) {
    const ImageRGB f1 = compose(fg, g), f2 = compose(fg, p);
    const RgbaForeground m = triangulate_frame(f1, f2, green, purple);
    pred.push_back(m);
    pred.push_back(m);
    gt.push_back(fg);
    gt.push_back(fg);
  }
  const ImageRGB bg = make_checkerboard(w, h, 16, {0.8f, 0.8f, 0.8f}, {0.4f, 0.4f, 0.4f});
  const MetricReport r = evaluate_sequence(pred, gt, bg);
  bool all_capped = true;
  double lowest = kPsnrCapDb;
  for (const FrameMetrics& f : r.frames) {
    all_capped = all_capped && f.psnr == kPsnrCapDb;
    lowest = std::min(lowest, f.psnr);
  }
  const double t = seconds_since(t0);
  return {all_capped && r.mean.psnr == kPsnrCapDb && t < kPureBackingSeconds,
          "mean PSNR " + fmt("%.2f", r.mean.psnr) + " dB, lowest frame " + fmt("%.2f", lowest) + " dB, " +
              fmt("%.1f s", t)};
}

// 3 -------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const net::Network<float> model(net::ModelConfig{});
  const auto params = net::random_check_params(model, 303);
  const auto batch = net::random_check_batch(64, 1, 304);
  net::GradCheckOptions opt;
  opt.coordinates = 200;
  opt.seed = 305;
  const net::GradCheckReport r = net::check_gradient(model, params, batch, net::LossConfig::scaled_to(64), opt);
  const double t = seconds_since(t0);
  const bool ok = r.coords.size() == 200 && r.max_rel_error <= kGradRelTol && t < kGradSeconds;
  return {ok, std::to_string(r.coords.size()) + " coords of " + std::to_string(model.param_count()) +
                  " params, max rel err " + fmt("%.2e", r.max_rel_error) + ", " +
                  std::to_string(r.nonsmooth_rejected) + " kink stencils redrawn, " + fmt("%.1f s", t)};
}

// 4 -------------------------------------------------------------------------

Outcome loss_contract() {
  const net::LossConfig cfg = net::LossConfig::scaled_to(64);
  const int patch = 64, b = cfg.inner_border, inner = patch - 2 * b;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  net::Tensor<float> gt(4, patch, patch);
  for (float& v : gt.values) v = u(rng);
  for (int y = 0; y < patch; ++y)
    for (int x = 0; x < patch; ++x) gt.at(3, y, x) = 0.1f + 0.9f * u(rng);  // m = 1 everywhere

  const double per_pixel = net::loss(gt, gt, gt, gt, cfg) / (double(inner) * inner);
  const double floor = 5.0 * cfg.epsilon;
  const bool floor_ok = std::abs(per_pixel - floor) <= kLossFloorRelTol * floor;

  // Perturb every border value of both outputs; loss and its gradient there
  // must not move. An inner perturbation must.
  net::Tensor<float> pred(4, patch, patch);
  for (float& v : pred.values) v = u(rng);
  const double base = net::loss(pred, pred, gt, gt, cfg);
  net::Tensor<float> wild = pred;
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < patch; ++y)
      for (int x = 0; x < patch; ++x)
        if (y < b || y >= patch - b || x < b || x >= patch - b) wild.at(c, y, x) = u(rng);
  const double moved = net::loss(wild, wild, gt, gt, cfg);
  net::Tensor<float> g1, g2;
  net::loss_with_grad(wild, wild, gt, gt, cfg, g1, g2);
  bool zero_grad = true;
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < patch; ++y)
      for (int x = 0; x < patch; ++x)
        if (y < b || y >= patch - b || x < b || x >= patch - b)
          zero_grad = zero_grad && g1.at(c, y, x) == 0.f && g2.at(c, y, x) == 0.f;
  net::Tensor<float> inner_moved = pred;
  inner_moved.at(3, patch / 2, patch / 2) += 0.25f;
  const bool inner_counts = net::loss(inner_moved, pred, gt, gt, cfg) != base;

  return {floor_ok && moved == base && zero_grad && inner_counts,
          "per-pixel floor " + fmt("%.9e", per_pixel) + " vs 5eps " + fmt("%.1e", floor) +
              (moved == base ? ", border perturbation inert" : ", border perturbation changed loss") +
              (zero_grad ? ", border gradient zero" : ", border gradient nonzero")};
}

// 5 -------------------------------------------------------------------------

struct OverfitRun {
  int epochs = 0;
  double mae = 1.0;
  double loss_per_pixel = 0.0;
  std::vector<float> params;
};

OverfitRun overfit(int epoch_limit, bool stop_at_target) {
  const AugmentSpec spec = AugmentSpec::scaled_to(64);
  Rng rng(5);
  std::vector<net::Sample<float>> set;
  for (int i = 0; i < 4; ++i) {
    const RgbaForeground fg = make_procedural_foreground(96, 96, rng);
    const ImageRGB b1 = make_procedural_backing(192, 192, {0.1f, 0.8f, 0.2f}, rng);
    const ImageRGB b2 = make_procedural_backing(192, 192, {0.6f, 0.2f, 0.7f}, rng);
    set.push_back(net::to_network_sample(sample_pair(fg, b1, b2, spec, rng)));
  }
  const net::Network<float> model(net::ModelConfig{});
  const net::LossConfig lc = net::LossConfig::scaled_to(64);
  net::TrainConfig tc;
  tc.max_epochs = epoch_limit;
  tc.seed = 1;
  const int b = lc.inner_border, e = 64 - lc.inner_border;

  auto mae = [&](const std::vector<float>& p) {
    double err = 0.0;
    long n = 0;
    for (const auto& s : set) {
      const auto out = model.forward(p, s.input);
      for (int y = b; y < e; ++y)
        for (int x = b; x < e; ++x) {
          err += std::abs(out.frame1.at(3, y, x) - s.gt1.at(3, y, x));
          err += std::abs(out.frame2.at(3, y, x) - s.gt2.at(3, y, x));
          n += 2;
        }
    }
    return err / n;
  };

  OverfitRun run;
  const auto result = net::train(model, net::initial_state(model, tc), set, set, lc, tc, 1,
                                 [&](const net::EpochRecord&, const net::TrainState& st) {
                                   return !(stop_at_target && mae(st.params) < kOverfitMae);
                                 });
  run.epochs = result.state.epoch;
  run.mae = mae(result.state.params);
  run.params = result.state.params;
  run.loss_per_pixel = net::batch_loss<float>(model, run.params, set, lc) / (set.size() * double(e - b) * (e - b));
  return run;
}

Outcome overfit_capability() {
  const auto t0 = Clock::now();
  const OverfitRun first = overfit(kOverfitEpochs, true);
  const double t = seconds_since(t0);
  const OverfitRun again = overfit(first.epochs, false);
  const bool same = again.params == first.params;
  const bool ok = first.mae < kOverfitMae && first.epochs <= kOverfitEpochs && same && t < kOverfitSeconds;
  return {ok, "inner alpha MAE " + fmt("%.4f", first.mae) + " after " + std::to_string(first.epochs) + " epochs (" +
                  fmt("%.0f s", t) + "), rerun " + (same ? "bit-identical" : "DIFFERS") +
                  "; loss/pixel " + fmt("%.3e", first.loss_per_pixel) + " (informational, 10x floor is 5e-5)"};
}

// 6 -------------------------------------------------------------------------

Outcome tiler_partition() {
  const TileParams p;
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> dim(p.patch_size, 1200);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const TileLayout l = plan_tiles(dim(rng), dim(rng), p);
    std::vector<double> sum(static_cast<std::size_t>(l.width) * l.height, 0.0);
    for (std::size_t t = 0; t < l.tile_count(); ++t) {
      const AxisTile& col = l.columns[t % l.columns.size()];
      const AxisTile& row = l.rows[t / l.columns.size()];
      for (int y = row.support_begin; y < row.support_end; ++y)
        for (int x = col.support_begin; x < col.support_end; ++x)
          sum[static_cast<std::size_t>(y) * l.width + x] += l.weight(t, x, y);
    }
    for (double s : sum) worst = std::max(worst, std::abs(s - 1.0));
  }

  std::uniform_real_distribution<float> u(0.f, 1.f);
  RgbaForeground gt(900, 700);
  for (float& v : gt.color.data()) v = u(rng);
  for (float& v : gt.alpha.data()) v = u(rng);
  const TileLayout l = plan_tiles(gt.width(), gt.height(), p);
  std::vector<RgbaForeground> tiles;
  for (std::size_t t = 0; t < l.tile_count(); ++t) {
    const auto [ox, oy] = l.origin(t);
    tiles.push_back(crop(gt, ox, oy, p.patch_size, p.patch_size));
  }
  const RgbaForeground fused = blend_fuse(tiles, l);
  double fusion = 0.0;
  for (std::size_t i = 0; i < gt.color.data().size(); ++i)
    fusion = std::max(fusion, double(std::abs(fused.color.data()[i] - gt.color.data()[i])));
  for (std::size_t i = 0; i < gt.alpha.data().size(); ++i)
    fusion = std::max(fusion, double(std::abs(fused.alpha.data()[i] - gt.alpha.data()[i])));

  const TileLayout full = plan_tiles(2448, 1600, p);
  const bool ok = worst <= kUnityTol && fusion <= kFusionTol && full.tile_count() == 126 && p.stride() == 170;
  return {ok, "max |sum w - 1| " + fmt("%.2e", worst) + ", identity fusion " + fmt("%.2e", fusion) + ", 2448x1600 -> " +
                  std::to_string(full.tile_count()) + " tiles (" + std::to_string(full.tiles_across()) + "x" +
                  std::to_string(full.tiles_down()) + ", stride " + std::to_string(p.stride()) + ")"};
}

// 7 -------------------------------------------------------------------------

Outcome spill_blend_endpoints() {
  auto blend = [](float a, Rgb pred, Rgb orig, Rgb bg, SpillBlendMode mode) {
    RgbaForeground fg(make_solid(1, 1, pred), AlphaMatte(1, 1, a));
    return pixel(compose_spill_corrected(fg, make_solid(1, 1, orig), make_solid(1, 1, bg), mode), 0, 0);
  };
  auto near = [](Rgb x, Rgb y) {
    return std::abs(x.r - y.r) <= kBlendTol && std::abs(x.g - y.g) <= kBlendTol && std::abs(x.b - y.b) <= kBlendTol;
  };
  const Rgb pred{0.9f, 0.2f, 0.1f}, orig{0.3f, 0.7f, 0.4f}, bg{0.1f, 0.5f, 0.8f};
  bool ok = true;
  for (auto mode : {SpillBlendMode::VerbatimEq4, SpillBlendMode::TextSemantics})
    ok = ok && near(blend(0.f, pred, orig, bg, mode), bg);
  ok = ok && near(blend(1.f, pred, orig, bg, SpillBlendMode::VerbatimEq4), pred);
  ok = ok && near(blend(1.f, pred, orig, bg, SpillBlendMode::TextSemantics), orig);
  const Rgb mid = blend(0.5f, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, SpillBlendMode::VerbatimEq4);
  ok = ok && near(mid, {0.25f, 0.25f, 0.5f});
  return {ok, "a=0 -> bg, a=1 -> pred / orig, mid example (" + fmt("%.4f", mid.r) + "," + fmt("%.4f", mid.g) + "," +
                  fmt("%.4f", mid.b) + ")"};
}

// 8 -------------------------------------------------------------------------

Outcome mad_checks() {
  const double hand = mad({AlphaMatte(2, 2, 0.f), AlphaMatte(2, 2, 1.f)});
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  AlphaMatte still(32, 24);
  for (float& v : still.data()) v = u(rng);
  const double static_mad = mad({still, still, still, still});

  std::vector<AlphaMatte> seq, shuffled;
  for (int n = 0; n < 5; ++n) {
    AlphaMatte a(32, 24);
    for (float& v : a.data()) v = u(rng);
    seq.push_back(a);
    std::vector<float> vals(a.data().begin(), a.data().end());
    std::shuffle(vals.begin(), vals.end(), rng);
    std::copy(vals.begin(), vals.end(), a.data().begin());
    shuffled.push_back(a);
  }
  const double m1 = mad(seq), m2 = mad(shuffled);
  const bool ok = std::abs(hand - 127.5) <= kMadTol && static_mad == 0.0 && std::abs(m1 - m2) <= kMadTol * std::max(1.0, m1);
  return {ok, "2-frame case " + fmt("%.6f", hand) + ", static " + fmt("%.1f", static_mad) + ", permuted " +
                  fmt("%.9f", m1) + " vs " + fmt("%.9f", m2)};
}

// 9 -------------------------------------------------------------------------

Outcome duplex_schedule() {
  const DuplexSchedule s;
  const Timeline tl = simulate(s, Rational(40), s.exposure / Rational(s.scan_ratio));
  bool equal = tl.frame_count > 0, clean = true;
  for (int f = 0; f < tl.frame_count; ++f) {
    const CameraView v = camera_view(tl, f);
    for (const Rational& t : v.row_on_time) equal = equal && t == Rational(1, 8);
    clean = clean && !v.sync_violation;
  }
  Rational vfx, keying;
  for (const PhaseShare& p : phase_histogram(tl)) (p.phase == "vfx" ? vfx : keying) += p.fraction;
  bool invariants = true;
  for (const InvariantCheck& c : verify(tl)) invariants = invariants && c.pass;
  const bool ok = equal && clean && vfx == Rational(9, 10) && keying == Rational(1, 10) && invariants;
  return {ok, std::to_string(tl.frame_count) + " exposures, per-row on-time " + (equal ? "1/8 ms each" : "UNEQUAL") +
                  ", vfx share " + vfx.str() + ", keying share " + keying.str()};
}

// 10 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count_b;
  if (count_b != files.size()) {
    why = "file counts differ";
    return false;
  }
  for (const auto& f : files) {
    // Resolved configs record the output paths, which differ by design.
    if (f.filename().string().find("_resolved.cfg") != std::string::npos) continue;
    if (slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

int run_command(const std::string& cmd, const fs::path& log) {
  return std::system((cmd + " >" + log.string() + " 2>&1").c_str());
}

Outcome end_to_end(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no --cli binary given"};
  const auto t0 = Clock::now();
  auto pipeline = [&](const fs::path& dir, std::string& err) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::vector<std::string> steps = {
        cli + " synth --seed 11 --out " + d + "/data --synth.sequence_frames 4",
        cli + " train --seed 11 --data " + d + "/data --out " + d + "/run/model.ckpt --epochs 5",
        cli + " infer --checkpoint " + d + "/run/model.ckpt --frames-dir " + d + "/data/sequence/frames --out-dir " +
            d + "/pred",
        cli + " evaluate --pred-dir " + d + "/pred --gt-dir " + d + "/data/sequence/gt --orig-dir " + d +
            "/data/sequence/frames --out " + d + "/report/report.json",
    };
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (run_command(steps[i], dir / ("step" + std::to_string(i) + ".log")) != 0) {
        err = "step " + std::to_string(i) + " failed: " + slurp(dir / ("step" + std::to_string(i) + ".log"));
        return false;
      }
    }
    return true;
  };
  std::string err;
  if (!pipeline(work / "e2e_a", err) || !pipeline(work / "e2e_b", err)) return {false, err};
  std::string why;
  const bool identical = same_tree(work / "e2e_a" / "data", work / "e2e_b" / "data", why) &&
                         same_tree(work / "e2e_a" / "run", work / "e2e_b" / "run", why) &&
                         same_tree(work / "e2e_a" / "pred", work / "e2e_b" / "pred", why) &&
                         same_tree(work / "e2e_a" / "report", work / "e2e_b" / "report", why);

  const auto report = nlohmann::json::parse(slurp(work / "e2e_a" / "report" / "report.json"));
  bool metrics_ok = report.at("frame_count").get<int>() == 4 && report.at("has_ground_truth").get<bool>();
  for (const char* k : {"psnr", "sad", "mse", "gradient"}) {
    const double v = report.at("mean").at(k).get<double>();
    metrics_ok = metrics_ok && std::isfinite(v) && v != 0.0;
  }
  const double mad_v = report.at("mad").get<double>();
  metrics_ok = metrics_ok && std::isfinite(mad_v);
  const double t = seconds_since(t0);
  return {identical && metrics_ok && t < kSmokeSeconds,
          "PSNR " + fmt("%.2f", report.at("mean").at("psnr").get<double>()) + " dB, SAD " +
              fmt("%.3f", report.at("mean").at("sad").get<double>()) + ", MAD " + fmt("%.4f", mad_v) + ", " +
              (identical ? "two runs byte-identical" : "runs differ: " + why) + ", " + fmt("%.0f s", t)};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "duplexmat_acceptance";
  std::string cli;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) work = argv[++i];
    else if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.push_back(std::atoi(argv[++i]));
    else {
      std::cerr << "usage: acceptance [--workdir DIR] [--cli PATH] [--only N]...\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"triangulation round trip", triangulation_round_trip},
      {"two-backing matting on pure backings", two_backing_pure},
      {"gradient check", gradient_check},
      {"loss contract", loss_contract},
      {"overfit capability", overfit_capability},
      {"tiler partition of unity", tiler_partition},
      {"spill blend endpoints", spill_blend_endpoints},
      {"mean alpha deviation", mad_checks},
      {"duplex schedule", duplex_schedule},
      {"end-to-end smoke", [&] { return end_to_end(cli, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
