#include "duplexmat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "duplexmat/compositor.hpp"

namespace duplexmat {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream * 0x100000001B3ull + index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

AugmentSpec AugmentSpec::scaled_to(int output_size) {
  AugmentSpec s;
  const double k = output_size / 320.0;
  auto scale = [k](int v) { return static_cast<int>(std::lround(v * k)); };
  s.output_size = output_size;
  s.max_displacement = scale(50);
  s.inner_border = scale(50);
  s.crop_sizes = {output_size, scale(480), scale(640)};
  return s;
}

AugmentSpec AugmentSpec::without_photometric() const {
  AugmentSpec s = *this;
  s.flip_probability = 0.0;
  s.contrast_min = s.contrast_max = 1.0;
  s.jitter_amplitude = 0.0;
  return s;
}

void AugmentSpec::validate() const {
  if (max_displacement < 0) throw ConfigError("augment: max_displacement >= 0 violated");
  if (output_size <= 0) throw ConfigError("augment: output_size > 0 violated");
  if (crop_sizes.empty()) throw ConfigError("augment: crop_sizes must not be empty");
  for (int c : crop_sizes)
    if (c < output_size) throw ConfigError("augment: every crop size >= output_size violated");
  if (inner_border < 0 || 2 * inner_border >= output_size) {
    throw ConfigError("augment: 0 <= 2*inner_border < output_size violated");
  }
  if (flip_probability < 0.0 || flip_probability > 1.0) throw ConfigError("augment: flip_probability in [0,1] violated");
  if (contrast_min > contrast_max || contrast_min <= 0.0) throw ConfigError("augment: 0 < contrast_min <= contrast_max violated");
  if (jitter_amplitude < 0.0) throw ConfigError("augment: jitter_amplitude >= 0 violated");
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool overlaps(int a0, int alen, int b0, int blen) { return a0 < b0 + blen && b0 < a0 + alen; }

// Frame-j view of the foreground placed at `at`, cut out at `cut`.
RgbaForeground place_and_cut(const RgbaForeground& fg, Point at, Point cut, int size) {
  RgbaForeground out(size, size);
  for (int y = 0; y < size; ++y) {
    const int fy = cut.y + y - at.y;
    if (fy < 0 || fy >= fg.height()) continue;
    for (int x = 0; x < size; ++x) {
      const int fx = cut.x + x - at.x;
      if (fx < 0 || fx >= fg.width()) continue;
      for (int c = 0; c < 3; ++c) out.color(x, y, c) = fg.color(fx, fy, c);
      out.alpha(x, y) = fg.alpha(fx, fy);
    }
  }
  return out;
}

void apply_photometric(ImageRGB& img, const Photometric& ph) {
  if (ph.flip) img = flip_horizontal(img);
  if (ph.contrast == 1.f && ph.jitter == std::array<float, 3>{0.f, 0.f, 0.f}) return;
  auto d = img.data();
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) {
      float& v = d[i * 3 + c];
      v = clamp01((v - 0.5f) * ph.contrast + 0.5f + ph.jitter[c]);
    }
}

}  // namespace

SampleGeometry sample_geometry(int fg_w, int fg_h, int bg_w, int bg_h, const AugmentSpec& spec,
                               Rng& rng) {
  spec.validate();
  const int d = spec.max_displacement;
  if (fg_w + 2 * d > bg_w || fg_h + 2 * d > bg_h) {
    throw ConfigError("synth: foreground " + std::to_string(fg_w) + "x" + std::to_string(fg_h) +
                      " larger than background working area " + std::to_string(bg_w - 2 * d) + "x" +
                      std::to_string(bg_h - 2 * d));
  }
  std::vector<int> feasible;
  for (int c : spec.crop_sizes)
    if (c + 2 * d <= bg_w && c + 2 * d <= bg_h) feasible.push_back(c);
  if (feasible.empty()) {
    throw ConfigError("synth: background " + std::to_string(bg_w) + "x" + std::to_string(bg_h) +
                      " too small for any crop size plus displacement");
  }

  SampleGeometry g;
  g.crop_size = feasible[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(feasible.size()) - 1))];
  const int s = g.crop_size;
  g.a = {uniform_int(rng, d, bg_w - fg_w - d), uniform_int(rng, d, bg_h - fg_h - d)};

  // Cutouts that miss the foreground entirely are resampled.
  bool found = false;
  for (int attempt = 0; attempt < 100 && !found; ++attempt) {
    g.b = {uniform_int(rng, d, bg_w - s - d), uniform_int(rng, d, bg_h - s - d)};
    found = overlaps(g.b.x, s, g.a.x, fg_w) && overlaps(g.b.y, s, g.a.y, fg_h);
  }
  if (!found) {
    g.b = {std::clamp(g.a.x + fg_w / 2 - s / 2, d, bg_w - s - d),
           std::clamp(g.a.y + fg_h / 2 - s / 2, d, bg_h - s - d)};
  }
  g.v_foreground = {uniform_int(rng, -d, d), uniform_int(rng, -d, d)};
  g.v_cutout = {uniform_int(rng, -d, d), uniform_int(rng, -d, d)};
  return g;
}

RawCrops render_crops(const RgbaForeground& fg, const ImageRGB& bg1, const ImageRGB& bg2,
                      const SampleGeometry& g) {
  require_same_size(bg1, bg2, "synth backgrounds");
  const int s = g.crop_size;
  const Point a2{g.a.x + g.v_foreground.x, g.a.y + g.v_foreground.y};
  const Point b2{g.b.x + g.v_cutout.x, g.b.y + g.v_cutout.y};
  RawCrops raw;
  raw.gt1 = place_and_cut(fg, g.a, g.b, s);
  raw.gt2 = place_and_cut(fg, a2, b2, s);
  raw.bg1 = crop(bg1, g.b.x, g.b.y, s, s);
  raw.bg2 = crop(bg2, b2.x, b2.y, s, s);
  raw.p1 = compose(raw.gt1, raw.bg1);
  raw.p2 = compose(raw.gt2, raw.bg2);
  return raw;
}

Photometric sample_photometric(const AugmentSpec& spec, Rng& rng) {
  Photometric ph;
  ph.flip = spec.flip_probability > 0.0 && uniform_real(rng, 0.0, 1.0) < spec.flip_probability;
  ph.contrast = static_cast<float>(uniform_real(rng, spec.contrast_min, spec.contrast_max));
  for (float& j : ph.jitter)
    j = static_cast<float>(uniform_real(rng, -spec.jitter_amplitude, spec.jitter_amplitude));
  return ph;
}

TrainSample finalize_sample(const RawCrops& raw, const SampleGeometry& g, const Photometric& ph,
                            const AugmentSpec& spec) {
  const int o = spec.output_size;
  TrainSample s;
  s.geometry = g;
  s.photometric = ph;
  s.inner_border = spec.inner_border;
  s.p1 = resize_area(raw.p1, o, o);
  s.p2 = resize_area(raw.p2, o, o);
  s.gt1 = resize_area(raw.gt1, o, o);
  s.gt2 = resize_area(raw.gt2, o, o);
  apply_photometric(s.p1, ph);
  apply_photometric(s.p2, ph);
  apply_photometric(s.gt1.color, ph);
  apply_photometric(s.gt2.color, ph);
  if (ph.flip) {
    s.gt1.alpha = flip_horizontal(s.gt1.alpha);
    s.gt2.alpha = flip_horizontal(s.gt2.alpha);
  }
  return s;
}

TrainSample sample_pair(const RgbaForeground& fg, const ImageRGB& bg1, const ImageRGB& bg2,
                        const AugmentSpec& spec, Rng& rng) {
  const SampleGeometry g = sample_geometry(fg.width(), fg.height(), bg1.width(), bg1.height(), spec, rng);
  const RawCrops raw = render_crops(fg, bg1, bg2, g);
  const Photometric ph = sample_photometric(spec, rng);
  return finalize_sample(raw, g, ph, spec);
}

TupleCounts tuple_counts(std::size_t foregrounds, double split, std::size_t per_foreground) {
  const std::size_t total = foregrounds * per_foreground;
  const auto train = static_cast<std::size_t>(std::llround(split * static_cast<double>(total)));
  return {train, total - train};
}

namespace {

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_pool(std::vector<T> pool, double split, Rng& rng,
                                                     const char* what) {
  if (pool.size() < 2) {
    throw ConfigError(std::string("manifest: ") + what + " pool needs at least 2 entries to split");
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(pool.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, pool.size() - 1);
  std::vector<T> train(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<T> val(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  return {train, val};
}

}  // namespace

std::vector<ManifestRecord> build_manifest(const std::vector<std::string>& foregrounds,
                                           const std::vector<std::string>& background_sequence,
                                           double split, TupleCounts counts, std::uint64_t seed) {
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("manifest: split must be in (0,1)");
  if (foregrounds.empty()) throw ConfigError("manifest: empty foreground pool");
  if (background_sequence.size() < 2) throw ConfigError("manifest: empty background pool");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i + 1 < background_sequence.size(); i += 2)
    pairs.emplace_back(background_sequence[i], background_sequence[i + 1]);

  Rng rng(derive_seed(seed, 0, 0));
  auto [fg_train, fg_val] = split_pool(foregrounds, split, rng, "foreground");
  auto [bg_train, bg_val] = split_pool(pairs, split, rng, "background pair");

  std::vector<ManifestRecord> out;
  auto draw = [&](const std::vector<std::string>& fgs,
                  const std::vector<std::pair<std::string, std::string>>& bgs, std::size_t n,
                  const char* name, std::uint64_t stream) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng pick(derive_seed(seed, stream, i));
      const auto& fg = fgs[std::uniform_int_distribution<std::size_t>(0, fgs.size() - 1)(pick)];
      const auto& bg = bgs[std::uniform_int_distribution<std::size_t>(0, bgs.size() - 1)(pick)];
      out.push_back({fg, bg.first, bg.second, name, derive_seed(seed, stream + 10, i), i});
    }
  };
  draw(fg_train, bg_train, counts.train, "train", 1);
  draw(fg_val, bg_val, counts.val, "val", 2);
  return out;
}

std::string manifest_to_jsonl(const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["fg_path"] = r.fg_path;
    j["bg1_path"] = r.bg1_path;
    j["bg2_path"] = r.bg2_path;
    j["split"] = r.split;
    j["seed"] = r.seed;
    j["index"] = r.index;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ManifestRecord> manifest_from_jsonl(const std::string& text) {
  std::vector<ManifestRecord> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("fg_path"), j.at("bg1_path"), j.at("bg2_path"), j.at("split"),
                     j.at("seed"), j.at("index")});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("manifest: malformed record: ") + e.what());
    }
  }
  return out;
}

std::string sample_sidecar_json(const TrainSample& s, const ManifestRecord& rec) {
  auto pt = [](Point p) { return nlohmann::ordered_json{{"x", p.x}, {"y", p.y}}; };
  nlohmann::ordered_json j;
  j["split"] = rec.split;
  j["index"] = rec.index;
  j["seed"] = rec.seed;
  j["fg_path"] = rec.fg_path;
  j["bg1_path"] = rec.bg1_path;
  j["bg2_path"] = rec.bg2_path;
  j["crop_size"] = s.geometry.crop_size;
  j["output_size"] = s.p1.width();
  j["inner_border"] = s.inner_border;
  j["A"] = pt(s.geometry.a);
  j["B"] = pt(s.geometry.b);
  j["V_foreground"] = pt(s.geometry.v_foreground);
  j["V_cutout"] = pt(s.geometry.v_cutout);
  j["flip"] = s.photometric.flip;
  j["contrast"] = s.photometric.contrast;
  j["jitter"] = s.photometric.jitter;
  return j.dump(2);
}

RgbaForeground make_procedural_foreground(int width, int height, Rng& rng) {
  auto u = [&](double lo, double hi) { return uniform_real(rng, lo, hi); };
  RgbaForeground fg(width, height);
  const double cx = width * u(0.4, 0.6), cy = height * u(0.4, 0.6);
  const double rx = width * u(0.22, 0.32), ry = height * u(0.22, 0.32);
  const double soft = std::max(1.5, 0.06 * std::min(width, height));
  const Rgb base{static_cast<float>(u(0.2, 0.9)), static_cast<float>(u(0.1, 0.6)),
                 static_cast<float>(u(0.1, 0.7))};
  const Rgb tint{static_cast<float>(u(0.5, 1.0)), static_cast<float>(u(0.4, 0.9)),
                 static_cast<float>(u(0.2, 0.6))};
  // Translucent veil offset from the core.
  const double vx = cx + rx * u(0.5, 0.9), vy = cy - ry * u(0.3, 0.8);
  const double vr = std::min(rx, ry) * u(0.5, 0.8);
  const double veil_alpha = u(0.3, 0.7);
  // Thin strands radiating from the core.
  const int strands = 5;
  std::array<double, strands> angle{};
  for (double& a : angle) a = u(0.0, 2.0 * M_PI);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double edge = (1.0 - r) * std::min(rx, ry) / soft;
      double alpha = std::clamp(edge + 0.5, 0.0, 1.0);

      const double vd = std::hypot(x + 0.5 - vx, y + 0.5 - vy) / vr;
      if (vd < 1.0) alpha = std::max(alpha, veil_alpha * std::clamp((1.0 - vd) * 4.0, 0.0, 1.0));

      for (double a : angle) {
        const double px = x + 0.5 - cx, py = y + 0.5 - cy;
        const double along = px * std::cos(a) + py * std::sin(a);
        const double across = std::abs(-px * std::sin(a) + py * std::cos(a));
        const double reach = 1.45 * std::max(rx, ry);
        if (along > 0 && along < reach && across < 1.2) {
          alpha = std::max(alpha, 0.6 * (1.0 - across / 1.2) * (1.0 - along / reach));
        }
      }
      const double t = std::clamp((y + 0.5) / height, 0.0, 1.0);
      const float shade = static_cast<float>(0.85 + 0.15 * std::sin(0.4 * x + 0.25 * y));
      fg.color.set(x, y, 0, (base.r * (1 - t) + tint.r * t) * shade);
      fg.color.set(x, y, 1, (base.g * (1 - t) + tint.g * t) * shade);
      fg.color.set(x, y, 2, (base.b * (1 - t) + tint.b * t) * shade);
      // Quantize near-binary alphas so fully opaque / transparent regions exist.
      if (alpha < 1e-3) alpha = 0.0;
      if (alpha > 1.0 - 1e-3) alpha = 1.0;
      fg.alpha.set(x, y, 0, static_cast<float>(alpha));
    }
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (fg.alpha(x, y) == 0.f)
        for (int c = 0; c < 3; ++c) fg.color(x, y, c) = 0.f;
  return fg;
}

ImageRGB make_procedural_backing(int width, int height, Rgb nominal, Rng& rng, float shading,
                                 float noise) {
  constexpr int kGrid = 4;
  std::array<std::array<std::array<float, 3>, kGrid + 1>, kGrid + 1> coarse{};
  for (auto& row : coarse)
    for (auto& cell : row)
      for (float& v : cell) v = static_cast<float>(uniform_real(rng, -shading, shading));
  ImageRGB img(width, height);
  for (int y = 0; y < height; ++y) {
    const double gy = static_cast<double>(y) / std::max(1, height - 1) * kGrid;
    const int iy = std::min(kGrid - 1, static_cast<int>(gy));
    const double ty = gy - iy;
    for (int x = 0; x < width; ++x) {
      const double gx = static_cast<double>(x) / std::max(1, width - 1) * kGrid;
      const int ix = std::min(kGrid - 1, static_cast<int>(gx));
      const double tx = gx - ix;
      const float nom[3] = {nominal.r, nominal.g, nominal.b};
      for (int c = 0; c < 3; ++c) {
        const double s = (1 - ty) * ((1 - tx) * coarse[iy][ix][c] + tx * coarse[iy][ix + 1][c]) +
                         ty * ((1 - tx) * coarse[iy + 1][ix][c] + tx * coarse[iy + 1][ix + 1][c]);
        const double n = noise > 0.f ? uniform_real(rng, -noise, noise) : 0.0;
        img.set(x, y, c, static_cast<float>(nom[c] + s + n));
      }
    }
  }
  return img;
}

}  // namespace duplexmat
