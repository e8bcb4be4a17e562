#include "duplexmat/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "duplexmat/errors.hpp"
#include "duplexmat/parallel.hpp"

namespace duplexmat::net {

ValidationSchedule::ValidationSchedule(const TrainConfig& cfg, double initial_val_loss)
    : cfg_(cfg), lr_(cfg.learning_rate), best_(initial_val_loss) {
  cfg_.validate();
}

ValidationSchedule::Decision ValidationSchedule::observe(double val_loss) {
  Decision d;
  if (val_loss < best_) {
    best_ = val_loss;
    stagnant_ = 0;
    d.improved = true;
    return d;
  }
  d.restore = val_loss > best_;
  ++stagnant_;
  if (stagnant_ % cfg_.patience_decay == 0) {
    lr_ *= cfg_.lr_decay;
    d.decayed = true;
  }
  d.stop = stagnant_ >= cfg_.patience_stop;
  return d;
}

std::string to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::MaxEpochs: return "max_epochs";
    case TrainStatus::EarlyStopped: return "early_stopped";
    case TrainStatus::Diverged: return "diverged";
    case TrainStatus::Interrupted: return "interrupted";
  }
  return "unknown";
}

TrainState initial_state(const Network<float>& net, const TrainConfig& cfg) {
  TrainState s;
  s.params = net.init_params(derive_seed(cfg.seed, 2, 0));
  s.momentum.assign(s.params.size(), 0.f);
  s.learning_rate = cfg.learning_rate;
  return s;
}

double validation_loss(const Network<float>& net, const std::vector<float>& params,
                       const std::vector<Sample<float>>& set, const LossConfig& cfg, int threads) {
  std::vector<double> per(set.size(), 0.0);
  parallel_for(set.size(), threads, [&](std::size_t i) {
    per[i] = batch_loss<float>(net, params, std::span(&set[i], 1), cfg);
  });
  return std::accumulate(per.begin(), per.end(), 0.0);
}

TrainResult train(const Network<float>& net, TrainState state, const std::vector<Sample<float>>& train_set,
                  const std::vector<Sample<float>>& val_set, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, int threads, const EpochCallback& on_epoch) {
  train_cfg.validate();
  loss_cfg.validate(net.config().patch_size);
  if (train_set.empty() || val_set.empty()) throw ConfigError("train: empty training or validation set");
  if (state.params.size() != net.param_count() || state.momentum.size() != net.param_count())
    throw ConfigError("train: state does not match the network");

  TrainResult result;
  result.initial_val_loss = validation_loss(net, state.params, val_set, loss_cfg, threads);
  if (!std::isfinite(result.initial_val_loss)) throw NumericError("train: initial validation loss is not finite");

  // A resumed state carries its decayed rate.
  TrainConfig sched_cfg = train_cfg;
  if (state.learning_rate > 0.0) sched_cfg.learning_rate = state.learning_rate;
  ValidationSchedule schedule(sched_cfg, result.initial_val_loss);
  TrainState good = state;
  std::vector<float> g(net.param_count());
  std::vector<std::size_t> order(train_set.size());
  const int inner = net.config().patch_size - 2 * loss_cfg.inner_border;
  const double grad_scale = train_cfg.mean_over_pixels ? 1.0 / (static_cast<double>(inner) * inner) : 1.0;

  while (state.epoch < train_cfg.max_epochs) {
    const int epoch = state.epoch + 1;
    const double lr = schedule.learning_rate();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(train_cfg.seed, 3, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    try {
      for (std::size_t idx : order) {
        const double l = loss_and_grad<float>(net, state.params, std::span(&train_set[idx], 1), loss_cfg, g);
        rec.train_loss += l;
        const float mu = static_cast<float>(train_cfg.momentum);
        const float step = static_cast<float>(lr * grad_scale);
        for (std::size_t i = 0; i < g.size(); ++i) {
          state.momentum[i] = mu * state.momentum[i] + g[i];
          state.params[i] -= step * state.momentum[i];
        }
      }
      for (float v : state.params)
        if (!std::isfinite(v)) throw NumericError("non-finite parameter after update");
      rec.val_loss = validation_loss(net, state.params, val_set, loss_cfg, threads);
      if (!std::isfinite(rec.val_loss)) throw NumericError("non-finite validation loss");
    } catch (const NumericError& e) {
      result.state = good;
      result.status = TrainStatus::Diverged;
      result.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }

    const ValidationSchedule::Decision d = schedule.observe(rec.val_loss);
    state.epoch = epoch;
    if (d.restore) {
      const int done = state.epoch;
      state = good;
      state.epoch = done;
      rec.restored = true;
    }
    state.learning_rate = schedule.learning_rate();
    good = state;
    rec.stagnant = schedule.stagnant();
    result.history.push_back(rec);
    if (on_epoch && !on_epoch(rec, state)) {
      result.status = TrainStatus::Interrupted;
      break;
    }
    if (d.stop) {
      result.status = TrainStatus::EarlyStopped;
      break;
    }
  }
  result.state = std::move(state);
  return result;
}

Sample<float> to_network_sample(const TrainSample& s) {
  return {pack_input<float>(s.p1, s.p2), pack_rgba<float>(s.gt1), pack_rgba<float>(s.gt2)};
}

PairPredictor network_predictor(const Network<float>& net, const std::vector<float>& params) {
  return [&net, &params](const ImageRGB& p1, const ImageRGB& p2) {
    const NetworkOutput<float> out = net.forward(params, pack_input<float>(p1, p2));
    return std::make_pair(unpack_rgba(out.frame1), unpack_rgba(out.frame2));
  };
}

}  // namespace duplexmat::net
