#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "duplexmat/net/checkpoint.hpp"
#include "duplexmat/net/gradcheck.hpp"
#include "duplexmat/net/layers.hpp"
#include "duplexmat/net/loss.hpp"
#include "duplexmat/net/train.hpp"

using namespace duplexmat;
using namespace duplexmat::net;

namespace {

// Small enough that a forward pass is a few milliseconds.
ModelConfig tiny_model() {
  ModelConfig m;
  m.patch_size = 32;
  m.base_width = 2;
  return m;
}

LossConfig tiny_loss() {
  LossConfig l;
  l.inner_border = 4;
  return l;
}

Tensor<float> filled(int c, int h, int w, float v) {
  Tensor<float> t(c, h, w);
  std::fill(t.values.begin(), t.values.end(), v);
  return t;
}

Tensor<double> random_tensor(int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> t(c, h, w);
  for (double& v : t.values) v = n(rng);
  return t;
}

}  // namespace

TEST(ModelConfig, Validation) {
  ModelConfig m;
  m.patch_size = 48;
  EXPECT_THROW(m.validate(), ConfigError);
  m.patch_size = 64;
  m.base_width = 0;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_EQ(ModelConfig{}.widths(), (std::vector<int>{8, 16, 32, 64, 128}));
  EXPECT_EQ(ModelConfig{}.groups_for(4), 4);
  EXPECT_EQ(ModelConfig{}.groups_for(12), 6);
}

TEST(LossConfig, ScaledBorderAndValidation) {
  EXPECT_EQ(LossConfig::scaled_to(64).inner_border, 10);
  EXPECT_EQ(LossConfig::scaled_to(320).inner_border, 50);
  LossConfig l;
  EXPECT_THROW(l.validate(64), ConfigError);
  l.epsilon = 0.0;
  EXPECT_THROW(l.validate(320), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.patience_decay = 5;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.learning_rate = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Layers, DeconvDoublesResolution) {
  Tensor<float> in = filled(3, 5, 7, 1.f);
  std::vector<float> w(3 * 2 * 36, 0.1f), b(2, 0.f);
  Tensor<float> out;
  layers::deconv_forward(in, w.data(), b.data(), 2, out);
  EXPECT_EQ(out.channels, 2);
  EXPECT_EQ(out.height, 10);
  EXPECT_EQ(out.width, 14);
}

TEST(Layers, ConvMatchesDirectSum) {
  std::mt19937_64 rng(1);
  const Tensor<double> in = random_tensor(2, 5, 4, rng);
  std::vector<double> w(3 * 2 * 9), b(3);
  std::normal_distribution<double> n;
  for (double& v : w) v = n(rng);
  for (double& v : b) v = n(rng);
  Tensor<double> out;
  layers::conv3x3_forward(in, w.data(), b.data(), 3, out);
  for (int co = 0; co < 3; ++co)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 4; ++x) {
        double s = b[co];
        for (int ci = 0; ci < 2; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = y + ky - 1, xx = x + kx - 1;
              if (yy < 0 || yy >= 5 || xx < 0 || xx >= 4) continue;
              s += w[((co * 2 + ci) * 3 + ky) * 3 + kx] * in.at(ci, yy, xx);
            }
        EXPECT_NEAR(out.at(co, y, x), s, 1e-12);
      }
}

TEST(Layers, GroupNormStatistics) {
  std::mt19937_64 rng(2);
  const Tensor<double> in = random_tensor(4, 6, 6, rng);
  const std::vector<double> gamma(4, 1.0), beta(4, 0.0);
  Tensor<double> normalized, out;
  std::vector<double> rstd;
  layers::group_norm_forward(in, 2, gamma.data(), beta.data(), normalized, rstd, out);
  for (int g = 0; g < 2; ++g) {
    double mean = 0, var = 0;
    for (int c = 2 * g; c < 2 * g + 2; ++c)
      for (int i = 0; i < 36; ++i) mean += out.plane(c)[i];
    mean /= 72;
    for (int c = 2 * g; c < 2 * g + 2; ++c)
      for (int i = 0; i < 36; ++i) var += std::pow(out.plane(c)[i] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 72, 1.0, 1e-4);
  }
}

TEST(Layers, MaxPoolRoutesGradient) {
  Tensor<float> in(1, 2, 2);
  in.values = {0.1f, 0.9f, 0.3f, 0.2f};
  Tensor<float> out;
  std::vector<std::int32_t> arg;
  layers::maxpool_forward(in, out, arg);
  EXPECT_FLOAT_EQ(out.values[0], 0.9f);
  Tensor<float> g = filled(1, 1, 1, 2.f), gin;
  layers::maxpool_backward(g, arg, 2, 2, gin);
  EXPECT_EQ(gin.values, (std::vector<float>{0.f, 2.f, 0.f, 0.f}));
}

TEST(Network, ToyShapesAndRanges) {
  const Network<float> net(ModelConfig{});
  const auto params = net.init_params(1);
  EXPECT_EQ(params.size(), net.param_count());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-3.f, 3.f);
  Tensor<float> in(6, 64, 64);
  for (float& v : in.values) v = u(rng);
  const NetworkOutput<float> out = net.forward(params, in);
  for (const Tensor<float>* t : {&out.frame1, &out.frame2}) {
    EXPECT_EQ(t->channels, 4);
    EXPECT_EQ(t->height, 64);
    EXPECT_EQ(t->width, 64);
    for (float v : t->values) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.f);
      ASSERT_LE(v, 1.f);
    }
  }
}

TEST(Network, LayerCounts) {
  const Network<float> net(ModelConfig{});
  std::size_t convs = 0;
  for (const auto& block : net.encoder()) convs += block.size();
  EXPECT_EQ(convs, 13u);
  EXPECT_EQ(net.decoder(0).blocks.size(), 5u);
  EXPECT_EQ(net.decoder(1).blocks.size(), 5u);
}

TEST(Network, ShapeMismatch) {
  const Network<float> net(tiny_model());
  const auto params = net.init_params(1);
  EXPECT_THROW(net.forward(params, Tensor<float>(6, 64, 64)), DimensionError);
  EXPECT_THROW(net.forward(params, Tensor<float>(3, 32, 32)), DimensionError);
  std::vector<float> short_params(params.begin(), params.end() - 1);
  EXPECT_THROW(net.forward(short_params, Tensor<float>(6, 32, 32)), ConfigError);
}

TEST(Network, NonFiniteNamesLayer) {
  const Network<float> net(tiny_model());
  auto params = net.init_params(1);
  params[net.decoder(1).blocks[2].up.weights] = std::numeric_limits<float>::infinity();
  try {
    net.forward(params, filled(6, 32, 32, 0.5f));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("dec2.up3"), std::string::npos) << e.what();
  }
}

TEST(Network, SwappedInputsStayInRange) {
  const Network<float> net(tiny_model());
  const auto params = net.init_params(4);
  const auto batch = random_check_batch(32, 1, 1);
  Tensor<float> swapped(6, 32, 32);
  std::copy(batch[0].input.values.begin() + 3 * 1024, batch[0].input.values.end(), swapped.values.begin());
  std::copy(batch[0].input.values.begin(), batch[0].input.values.begin() + 3 * 1024,
            swapped.values.begin() + 3 * 1024);
  const auto out = net.forward(params, swapped);
  for (float v : out.frame1.values) ASSERT_TRUE(std::isfinite(v) && v >= 0.f && v <= 1.f);
}

TEST(Loss, PerfectPredictionFloor) {
  Tensor<float> gt = filled(4, 64, 64, 0.5f);
  const LossConfig cfg = LossConfig::scaled_to(64);
  const double per_pixel = loss(gt, gt, gt, gt, cfg) / (44.0 * 44.0);
  EXPECT_NEAR(per_pixel, 5e-6, 5e-6 * 1e-6);
}

TEST(Loss, ZeroAlphaMasksColor) {
  Tensor<float> gt = filled(4, 32, 32, 0.f);
  Tensor<float> pred = gt, wild = gt;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < wild.plane_size(); ++i) wild.plane(c)[i] = 0.9f;
  EXPECT_EQ(loss(pred, pred, gt, gt, tiny_loss()), loss(wild, wild, gt, gt, tiny_loss()));
}

TEST(Loss, BorderDoesNotContribute) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> gt(4, 32, 32), pred(4, 32, 32);
  for (float& v : gt.values) v = u(rng);
  for (float& v : pred.values) v = u(rng);
  const double base = loss(pred, pred, gt, gt, tiny_loss());
  Tensor<float> g1, g2;
  loss_with_grad(pred, pred, gt, gt, tiny_loss(), g1, g2);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const bool inner = y >= 4 && y < 28 && x >= 4 && x < 28;
        if (!inner) {
          pred.at(c, y, x) = u(rng);
          EXPECT_EQ(g1.at(c, y, x), 0.f);
        }
      }
  EXPECT_EQ(loss(pred, pred, gt, gt, tiny_loss()), base);
}

TEST(Loss, PermutationInvariantInsideInnerRegion) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<double> gt(4, 16, 16), pred(4, 16, 16);
  for (double& v : gt.values) v = u(rng);
  for (double& v : pred.values) v = u(rng);
  LossConfig cfg;
  cfg.inner_border = 2;
  const double base = loss(pred, pred, gt, gt, cfg);
  // Swap two inner pixels (all channels) in both prediction and truth.
  for (int c = 0; c < 4; ++c) {
    std::swap(gt.at(c, 3, 4), gt.at(c, 10, 12));
    std::swap(pred.at(c, 3, 4), pred.at(c, 10, 12));
  }
  EXPECT_NEAR(loss(pred, pred, gt, gt, cfg), base, 1e-12);
}

TEST(Grad, ZeroWeightsGiveZeroGradient) {
  const Network<float> net(tiny_model());
  const auto params = net.init_params(1);
  const auto batch = random_check_batch(32, 1, 2);
  LossConfig cfg = tiny_loss();
  cfg.alpha_weight = cfg.color_weight = 0.0;
  for (float g : grad<float>(net, params, batch, cfg)) ASSERT_EQ(g, 0.f);
}

TEST(Grad, DuplicateSampleDoubles) {
  const Network<double> net(tiny_model());
  std::vector<double> params;
  {
    const Network<float> f(tiny_model());
    const auto p = random_check_params(f, 3);
    params.assign(p.begin(), p.end());
  }
  const auto fb = random_check_batch(32, 1, 4);
  Sample<double> s{Tensor<double>(6, 32, 32), Tensor<double>(4, 32, 32), Tensor<double>(4, 32, 32)};
  std::copy(fb[0].input.values.begin(), fb[0].input.values.end(), s.input.values.begin());
  std::copy(fb[0].gt1.values.begin(), fb[0].gt1.values.end(), s.gt1.values.begin());
  std::copy(fb[0].gt2.values.begin(), fb[0].gt2.values.end(), s.gt2.values.begin());
  const std::vector<Sample<double>> one{s}, two{s, s};
  const auto g1 = grad<double>(net, params, one, tiny_loss());
  const auto g2 = grad<double>(net, params, two, tiny_loss());
  for (std::size_t i = 0; i < g1.size(); ++i) ASSERT_NEAR(g2[i], 2 * g1[i], 1e-12 * (1 + std::abs(g1[i])));
}

TEST(Grad, FiniteDifferencesDoublePrecisionTinyModel) {
  // Analytic double gradient against central differences on the same model.
  const Network<float> f(tiny_model());
  const auto pf = random_check_params(f, 5);
  const auto fb = random_check_batch(32, 1, 6);
  const Network<double> net(tiny_model());
  std::vector<double> p(pf.begin(), pf.end());
  Sample<double> s{Tensor<double>(6, 32, 32), Tensor<double>(4, 32, 32), Tensor<double>(4, 32, 32)};
  std::copy(fb[0].input.values.begin(), fb[0].input.values.end(), s.input.values.begin());
  std::copy(fb[0].gt1.values.begin(), fb[0].gt1.values.end(), s.gt1.values.begin());
  std::copy(fb[0].gt2.values.begin(), fb[0].gt2.values.end(), s.gt2.values.begin());
  const std::vector<Sample<double>> batch{s};
  const auto g = grad<double>(net, p, batch, tiny_loss());
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  int checked = 0, skipped = 0;
  while (checked < 60) {
    const std::size_t i = pick(rng);
    auto central = [&](double h) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = batch_loss<double>(net, p, batch, tiny_loss());
      p[i] = saved - h;
      const double down = batch_loss<double>(net, p, batch, tiny_loss());
      p[i] = saved;
      return (up - down) / (2 * h);
    };
    const double a = central(1e-5), b = central(5e-6);
    if (std::abs(a - b) > 1e-6 * std::max({std::abs(a), std::abs(b), 1e-3})) {
      ++skipped;
      continue;
    }
    const double rel = std::abs(g[i] - a) / std::max({std::abs(g[i]), std::abs(a), 1e-3});
    EXPECT_LE(rel, 1e-6) << net.parameter_owner(i);
    ++checked;
  }
  EXPECT_LT(skipped, 20);
}

TEST(Grad, NonFiniteLossNamesLayer) {
  const Network<float> net(tiny_model());
  auto params = net.init_params(1);
  params[net.encoder()[1][0].conv.weights] = std::numeric_limits<float>::quiet_NaN();
  const auto batch = random_check_batch(32, 1, 2);
  try {
    grad<float>(net, params, batch, tiny_loss());
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("enc2.1"), std::string::npos) << e.what();
  }
}

TEST(ValidationSchedule, DecayAfterTwoStagnantEpochs) {
  const TrainConfig cfg;
  ValidationSchedule s(cfg, 10.0);
  EXPECT_TRUE(s.observe(9.0).improved);
  EXPECT_DOUBLE_EQ(s.learning_rate(), 0.01);
  EXPECT_TRUE(s.observe(9.5).restore);
  EXPECT_DOUBLE_EQ(s.learning_rate(), 0.01);
  const auto d = s.observe(9.0);  // tie: not an improvement, no restore
  EXPECT_FALSE(d.restore);
  EXPECT_TRUE(d.decayed);
  EXPECT_DOUBLE_EQ(s.learning_rate(), 0.006);
}

TEST(ValidationSchedule, StopsAfterFiveStagnant) {
  ValidationSchedule s(TrainConfig{}, 1.0);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(s.observe(2.0).stop);
  const auto d = s.observe(2.0);
  EXPECT_TRUE(d.stop);
  EXPECT_NEAR(s.learning_rate(), 0.01 * 0.6 * 0.6, 1e-15);
}

TEST(ValidationSchedule, ImprovementResets) {
  ValidationSchedule s(TrainConfig{}, 1.0);
  s.observe(1.5);
  EXPECT_EQ(s.stagnant(), 1);
  s.observe(0.5);
  EXPECT_EQ(s.stagnant(), 0);
}

TEST(Train, DeterministicHistory) {
  const Network<float> net(tiny_model());
  const auto set = random_check_batch(32, 2, 9);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 5;
  const auto a = train(net, initial_state(net, cfg), set, set, tiny_loss(), cfg);
  const auto b = train(net, initial_state(net, cfg), set, set, tiny_loss(), cfg, 2);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
    EXPECT_EQ(a.history[i].learning_rate, b.history[i].learning_rate);
  }
  EXPECT_EQ(a.state.params, b.state.params);
}

TEST(Train, RestoreKeepsPreviousParameters) {
  const Network<float> net(tiny_model());
  const auto set = random_check_batch(32, 2, 10);
  TrainConfig cfg;
  cfg.learning_rate = 50.0;  // large enough that validation gets worse
  cfg.max_epochs = 1;
  const TrainState start = initial_state(net, cfg);
  const auto r = train(net, start, set, set, tiny_loss(), cfg);
  if (r.status == TrainStatus::Diverged) {
    EXPECT_EQ(r.state.params, start.params);
  } else {
    ASSERT_EQ(r.history.size(), 1u);
    if (r.history[0].restored) EXPECT_EQ(r.state.params, start.params);
  }
}

TEST(Train, DivergenceKeepsCheckpoint) {
  const Network<float> net(tiny_model());
  auto set = random_check_batch(32, 1, 11);
  TrainConfig cfg;
  cfg.learning_rate = 1e30;
  cfg.max_epochs = 3;
  cfg.mean_over_pixels = false;
  const TrainState start = initial_state(net, cfg);
  const auto r = train(net, start, set, set, tiny_loss(), cfg);
  EXPECT_EQ(r.status, TrainStatus::Diverged);
  EXPECT_FALSE(r.message.empty());
  for (float v : r.state.params) ASSERT_TRUE(std::isfinite(v));
}

TEST(Train, CallbackCanStop) {
  const Network<float> net(tiny_model());
  const auto set = random_check_batch(32, 1, 12);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  const auto r = train(net, initial_state(net, cfg), set, set, tiny_loss(), cfg, 1,
                       [](const EpochRecord& rec, const TrainState&) { return rec.epoch < 2; });
  EXPECT_EQ(r.status, TrainStatus::Interrupted);
  EXPECT_EQ(r.state.epoch, 2);
}

TEST(Train, ResumeContinuesEpochCount) {
  const Network<float> net(tiny_model());
  const auto set = random_check_batch(32, 1, 13);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto first = train(net, initial_state(net, cfg), set, set, tiny_loss(), cfg);
  cfg.max_epochs = 3;
  const auto second = train(net, first.state, set, set, tiny_loss(), cfg);
  ASSERT_EQ(second.history.size(), 1u);
  EXPECT_EQ(second.history[0].epoch, 3);
}

TEST(Train, EmptySetsRejected) {
  const Network<float> net(tiny_model());
  const std::vector<Sample<float>> none;
  EXPECT_THROW(train(net, initial_state(net, {}), none, none, tiny_loss(), {}), ConfigError);
}

TEST(GradCheck, ToyModelFloat) {
  // Reduced version of the full-size check run by the acceptance suite.
  const Network<float> net(tiny_model());
  const auto params = random_check_params(net, 1);
  const auto batch = random_check_batch(32, 1, 2);
  GradCheckOptions o;
  o.coordinates = 40;
  const GradCheckReport r = check_gradient(net, params, batch, tiny_loss(), o);
  EXPECT_EQ(r.coords.size(), 40u);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(Checkpoint, RoundTrip) {
  const Network<float> net(tiny_model());
  Checkpoint c;
  c.model = tiny_model();
  c.loss = tiny_loss();
  c.train.seed = 77;
  c.state = initial_state(net, c.train);
  c.state.momentum[3] = 0.25f;
  c.state.epoch = 4;
  c.state.learning_rate = 0.006;
  const auto path = std::filesystem::temp_directory_path() / "duplexmat_ckpt" / "a.ckpt";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.state.params, c.state.params);
  EXPECT_EQ(back.state.momentum, c.state.momentum);
  EXPECT_EQ(back.state.epoch, 4);
  EXPECT_DOUBLE_EQ(back.state.learning_rate, 0.006);
  EXPECT_EQ(back.train.seed, 77u);
  EXPECT_EQ(back.model.hash(), c.model.hash());
}

TEST(Checkpoint, CorruptionDetected) {
  const Network<float> net(tiny_model());
  Checkpoint c;
  c.model = tiny_model();
  c.loss = tiny_loss();
  c.state = initial_state(net, c.train);
  const auto dir = std::filesystem::temp_directory_path() / "duplexmat_ckpt";
  save_checkpoint(dir / "b.ckpt", c);
  std::filesystem::resize_file(dir / "b.ckpt", std::filesystem::file_size(dir / "b.ckpt") - 4);
  EXPECT_THROW(load_checkpoint(dir / "b.ckpt"), IoError);
  EXPECT_THROW(load_checkpoint(dir / "nothing.ckpt"), IoError);
}
