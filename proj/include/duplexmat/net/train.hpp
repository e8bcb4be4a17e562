#pragma once

#include <functional>
#include <string>
#include <vector>

#include "duplexmat/net/loss.hpp"
#include "duplexmat/synth.hpp"
#include "duplexmat/tiler.hpp"

namespace duplexmat::net {

/// Validation-driven control of the learning rate and stopping.
///
/// A strictly higher validation loss than the best so far asks the caller to
/// restore the previous checkpoint. Any epoch without a strict improvement
/// counts as stagnant; every patience_decay stagnant epochs the rate is
/// multiplied by lr_decay, and patience_stop stagnant epochs end training.
class ValidationSchedule {
public:
  ValidationSchedule(const TrainConfig& cfg, double initial_val_loss);

  struct Decision {
    bool restore = false;
    bool improved = false;
    bool decayed = false;
    bool stop = false;
  };
  Decision observe(double val_loss);

  double learning_rate() const { return lr_; }
  int stagnant() const { return stagnant_; }
  double best() const { return best_; }

private:
  TrainConfig cfg_;
  double lr_;
  double best_;
  int stagnant_ = 0;
};

struct TrainState {
  std::vector<float> params;
  std::vector<float> momentum;
  int epoch = 0;  ///< completed epochs
  double learning_rate = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  ///< summed over the epoch's steps
  double val_loss = 0.0;
  double learning_rate = 0.0;  ///< rate used during this epoch
  bool restored = false;
  int stagnant = 0;
};

enum class TrainStatus { MaxEpochs, EarlyStopped, Diverged, Interrupted };
std::string to_string(TrainStatus status);

struct TrainResult {
  TrainState state;  ///< final parameters; the last good checkpoint after divergence
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> history;
  TrainStatus status = TrainStatus::MaxEpochs;
  std::string message;
};

/// Called after every epoch; returning false ends training (Interrupted).
using EpochCallback = std::function<bool(const EpochRecord&, const TrainState&)>;

/// SGD with momentum (v = mu*v + g; p -= lr*v), one sample per step, samples
/// reshuffled every epoch from the configured seed.
TrainResult train(const Network<float>& net, TrainState state, const std::vector<Sample<float>>& train_set,
                  const std::vector<Sample<float>>& val_set, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, int threads = 1, const EpochCallback& on_epoch = {});

/// Fresh state: initialized parameters, zero momentum, configured rate.
TrainState initial_state(const Network<float>& net, const TrainConfig& cfg);

/// Summed validation loss, samples evaluated on up to `threads` workers.
double validation_loss(const Network<float>& net, const std::vector<float>& params,
                       const std::vector<Sample<float>>& set, const LossConfig& cfg, int threads);

Sample<float> to_network_sample(const TrainSample& s);

/// Tile predictor backed by the network.
PairPredictor network_predictor(const Network<float>& net, const std::vector<float>& params);

}  // namespace duplexmat::net
