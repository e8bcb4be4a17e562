#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duplexmat/net/loss.hpp"

namespace duplexmat::net {

/// Initial parameters with the zero/one-initialized entries (biases, norm
/// offsets and scales) jittered, so no coordinate sits at a special value.
std::vector<float> random_check_params(const Network<float>& net, std::uint64_t seed);

/// Random inputs in [0,1] and ground truths with some zero alphas, so the
/// color mask is exercised.
std::vector<Sample<float>> random_check_batch(int patch_size, int count, std::uint64_t seed);

struct CoordinateCheck {
  std::size_t index = 0;
  std::string owner;
  double analytic = 0.0;
  double numeric = 0.0;
  double step = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<CoordinateCheck> coords;
  /// Coordinates rejected because the difference stencil straddles a kink
  /// (ReLU, pooling switch, clip); replaced by fresh draws.
  int nonsmooth_rejected = 0;
  double max_rel_error = 0.0;
  double gradient_rms = 0.0;
};

struct GradCheckOptions {
  int coordinates = 200;
  double step_factor = 1e-3;  ///< step = step_factor * RMS of the owning tensor
  /// Denominator floor as a fraction of the RMS of the full analytic gradient.
  double floor_factor = 1e-3;
  /// A stencil is smooth when the differences at h and h/2 agree to this
  /// relative tolerance.
  double smoothness_tolerance = 1e-4;
  /// Give up after this many rejections.
  int max_rejections = 100;
  std::uint64_t seed = 0;
};

/// Compares the float analytic gradient with central differences of the
/// same loss evaluated in double precision. The network is only piecewise
/// smooth, so coordinates whose stencil crosses a kink are redrawn.
GradCheckReport check_gradient(const Network<float>& net, const std::vector<float>& params,
                               const std::vector<Sample<float>>& batch, const LossConfig& cfg,
                               const GradCheckOptions& options);

}  // namespace duplexmat::net
