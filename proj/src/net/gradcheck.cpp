#include "duplexmat/net/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace duplexmat::net {

namespace {

bool is_offset(const std::string& name) {
  return name.ends_with(".bias") || name.ends_with(".beta");
}

template <typename A, typename B>
Tensor<B> convert(const Tensor<A>& t) {
  Tensor<B> out(t.channels, t.height, t.width);
  std::copy(t.values.begin(), t.values.end(), out.values.begin());
  return out;
}

double rms(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += v[i] * v[i];
  return end > begin ? std::sqrt(acc / static_cast<double>(end - begin)) : 0.0;
}

}  // namespace

std::vector<float> random_check_params(const Network<float>& net, std::uint64_t seed) {
  std::vector<float> p = net.init_params(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (const ParamTensor& t : net.parameter_tensors()) {
    if (is_offset(t.name)) {
      for (std::size_t i = t.begin; i < t.end; ++i) p[i] = static_cast<float>(jitter(rng));
    } else if (t.name.ends_with(".gamma")) {
      for (std::size_t i = t.begin; i < t.end; ++i) p[i] = static_cast<float>(1.0 + jitter(rng));
    }
  }
  return p;
}

std::vector<Sample<float>> random_check_batch(int patch_size, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample<float>> batch;
  for (int n = 0; n < count; ++n) {
    Sample<float> s{Tensor<float>(6, patch_size, patch_size), Tensor<float>(4, patch_size, patch_size),
                    Tensor<float>(4, patch_size, patch_size)};
    for (float& v : s.input.values) v = static_cast<float>(u(rng));
    for (Tensor<float>* gt : {&s.gt1, &s.gt2}) {
      for (float& v : gt->values) v = static_cast<float>(u(rng));
      float* alpha = gt->plane(3);
      for (std::size_t i = 0; i < gt->plane_size(); ++i)
        if (alpha[i] < 0.3f) alpha[i] = 0.f;
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

GradCheckReport check_gradient(const Network<float>& net, const std::vector<float>& params,
                               const std::vector<Sample<float>>& batch, const LossConfig& cfg,
                               const GradCheckOptions& options) {
  const std::vector<float> analytic = grad<float>(net, params, batch, cfg);

  const Network<double> net64(net.config());
  std::vector<double> p64(params.begin(), params.end());
  std::vector<Sample<double>> batch64;
  for (const Sample<float>& s : batch)
    batch64.push_back({convert<float, double>(s.input), convert<float, double>(s.gt1),
                       convert<float, double>(s.gt2)});

  GradCheckReport report;
  {
    double acc = 0.0;
    for (float g : analytic) acc += static_cast<double>(g) * g;
    report.gradient_rms = std::sqrt(acc / static_cast<double>(analytic.size()));
  }
  const double floor = options.floor_factor * report.gradient_rms;

  auto central = [&](std::size_t i, double h) {
    const double saved = p64[i];
    p64[i] = saved + h;
    const double up = batch_loss<double>(net64, p64, batch64, cfg);
    p64[i] = saved - h;
    const double down = batch_loss<double>(net64, p64, batch64, cfg);
    p64[i] = saved;
    return (up - down) / (2.0 * h);
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  while (static_cast<int>(report.coords.size()) < options.coordinates &&
         report.nonsmooth_rejected <= options.max_rejections) {
    const std::size_t i = pick(rng);
    const ParamTensor& owner = net.parameter_tensor(i);
    const double scale = rms(p64, owner.begin, owner.end);
    const double h = options.step_factor * (scale > 0.0 ? scale : 1.0);

    const double numeric = central(i, h);
    const double half = central(i, 0.5 * h);
    const double denom = std::max({std::abs(numeric), std::abs(half), floor});
    if (std::abs(numeric - half) > options.smoothness_tolerance * denom) {
      ++report.nonsmooth_rejected;
      continue;
    }

    CoordinateCheck c;
    c.index = i;
    c.owner = net.parameter_owner(i);
    c.analytic = analytic[i];
    c.numeric = numeric;
    c.step = h;
    c.rel_error = std::abs(c.analytic - c.numeric) / std::max({std::abs(c.analytic), std::abs(c.numeric), floor});
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.coords.push_back(std::move(c));
  }
  return report;
}

}  // namespace duplexmat::net
