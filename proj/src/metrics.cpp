#include "duplexmat/metrics.hpp"

#include <cmath>
#include <json.hpp>

namespace duplexmat {

SadResult sad(const AlphaMatte& pred, const AlphaMatte& gt) {
  require_same_size(pred, gt, "sad");
  double sum = 0.0;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(static_cast<double>(p[i]) - g[i]);
  return {sum, sum / 1000.0};
}

namespace {

template <int C>
double mse_impl(const Raster<C>& pred, const Raster<C>& gt) {
  require_same_size(pred, gt, "mse");
  if (pred.empty()) throw DimensionError("mse: empty input");
  double sum = 0.0;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - g[i];
    sum += d * d;
  }
  return sum / static_cast<double>(p.size());
}

std::vector<double> gaussian_kernel(double sigma, int radius, bool derivative) {
  std::vector<double> k(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  for (int i = -radius; i <= radius; ++i) {
    const double g = std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
    k[i + radius] = derivative ? -i / (sigma * sigma) * g : g;
  }
  return k;
}

// Separable correlation with replicated borders.
std::vector<double> filter2d(const std::vector<double>& src, int w, int h,
                             const std::vector<double>& kx, const std::vector<double>& ky) {
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kx[i + rx] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -ry; i <= ry; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += ky[i + ry] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

std::vector<double> gradient_magnitude(const AlphaMatte& a, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto g = gaussian_kernel(sigma, radius, false);
  const auto dg = gaussian_kernel(sigma, radius, true);
  std::vector<double> src(a.data().begin(), a.data().end());
  const auto gx = filter2d(src, a.width(), a.height(), dg, g);
  const auto gy = filter2d(src, a.width(), a.height(), g, dg);
  std::vector<double> mag(src.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(gx[i], gy[i]);
  return mag;
}

double alpha_sum_255(const AlphaMatte& a) {
  double s = 0.0;
  for (float v : a.data()) s += 255.0 * v;
  return s;
}

}  // namespace

double mse(const AlphaMatte& pred, const AlphaMatte& gt) { return mse_impl(pred, gt); }
double mse(const ImageRGB& pred, const ImageRGB& gt) { return mse_impl(pred, gt); }

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

double psnr(const ImageRGB& pred, const ImageRGB& gt) { return psnr_from_mse(mse(pred, gt)); }

double gradient_error(const AlphaMatte& pred, const AlphaMatte& gt, double sigma) {
  require_same_size(pred, gt, "gradient_error");
  if (!(sigma > 0.0)) throw ConfigError("gradient_error: sigma must be > 0");
  const auto mp = gradient_magnitude(pred, sigma);
  const auto mg = gradient_magnitude(gt, sigma);
  double sum = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i) {
    const double d = mp[i] - mg[i];
    sum += d * d;
  }
  return sum;
}

double mad(const std::vector<AlphaMatte>& alphas) {
  if (alphas.size() < 2) throw ConfigError("mad: need at least 2 frames");
  for (const auto& a : alphas) require_same_size(a, alphas.front(), "mad");
  const double n = static_cast<double>(alphas.size());
  const double wh = static_cast<double>(alphas.front().pixel_count());
  double prev = alpha_sum_255(alphas.front());
  double total = 0.0;
  for (std::size_t i = 1; i < alphas.size(); ++i) {
    const double cur = alpha_sum_255(alphas[i]);
    total += std::abs(prev - cur) / wh;
    prev = cur;
  }
  return total / n;
}

MetricReport evaluate_sequence(const std::vector<RgbaForeground>& pred,
                               const std::optional<std::vector<RgbaForeground>>& gt,
                               const ImageRGB& bg, const EvaluationConfig& config,
                               const std::vector<ImageRGB>* orig_frames) {
  if (pred.empty()) throw ConfigError("evaluate: empty prediction sequence");
  if (gt && gt->size() != pred.size()) {
    throw ConfigError("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                      std::to_string(gt->size()) + " ground-truth frames");
  }
  if (orig_frames && orig_frames->size() != pred.size()) {
    throw ConfigError("evaluate: original frame count does not match predictions");
  }
  MetricReport report;
  report.sequence_name = config.sequence_name;
  report.frame_count = static_cast<int>(pred.size());
  report.width = pred.front().width();
  report.height = pred.front().height();
  report.has_ground_truth = gt.has_value();
  if (orig_frames) report.prediction_composite = "spill_corrected:" + std::string(to_string(config.spill_mode));

  std::vector<AlphaMatte> alphas;
  alphas.reserve(pred.size());
  for (const auto& p : pred) alphas.push_back(p.alpha);
  if (alphas.size() >= 2) report.mad = mad(alphas);

  if (!gt) return report;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const RgbaForeground& p = pred[i];
    const RgbaForeground& g = (*gt)[i];
    const ImageRGB gt_comp = compose(g, bg);
    const ImageRGB pred_comp = orig_frames
                                   ? compose_spill_corrected(p, (*orig_frames)[i], bg, config.spill_mode)
                                   : compose(p, bg);
    FrameMetrics fm;
    fm.psnr = psnr(pred_comp, gt_comp);
    const SadResult s = sad(p.alpha, g.alpha);
    fm.sad_raw = s.raw;
    fm.sad = s.scaled;
    fm.mse = mse(p.alpha, g.alpha);
    fm.gradient = gradient_error(p.alpha, g.alpha, config.gradient_sigma);
    report.frames.push_back(fm);
  }
  const double n = static_cast<double>(report.frames.size());
  for (const FrameMetrics& fm : report.frames) {
    report.mean.psnr += fm.psnr / n;
    report.mean.sad_raw += fm.sad_raw / n;
    report.mean.sad += fm.sad / n;
    report.mean.mse += fm.mse / n;
    report.mean.gradient += fm.gradient / n;
  }
  return report;
}

std::string report_to_json(const MetricReport& r, int indent) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["sequence"] = r.sequence_name;
  j["frame_count"] = r.frame_count;
  j["width"] = r.width;
  j["height"] = r.height;
  j["region"] = r.region;
  j["has_ground_truth"] = r.has_ground_truth;
  if (r.frame_count >= 2) j["mad"] = r.mad;
  if (r.has_ground_truth) {
    j["prediction_composite"] = r.prediction_composite;
    auto frame_json = [](const FrameMetrics& f) {
      ordered_json o;
      o["psnr"] = f.psnr;
      o["sad"] = f.sad;
      o["sad_raw"] = f.sad_raw;
      o["mse"] = f.mse;
      o["gradient"] = f.gradient;
      return o;
    };
    j["mean"] = frame_json(r.mean);
    ordered_json frames = ordered_json::array();
    for (const auto& f : r.frames) frames.push_back(frame_json(f));
    j["frames"] = frames;
  }
  return j.dump(indent);
}

}  // namespace duplexmat
