#pragma once

#include <optional>
#include <string>
#include <vector>

#include "duplexmat/compositor.hpp"
#include "duplexmat/image.hpp"

namespace duplexmat {

inline constexpr double kPsnrCapDb = 60.0;
inline constexpr double kDefaultGradientSigma = 1.4;

struct SadResult {
  double raw = 0.0;     ///< sum of absolute differences
  double scaled = 0.0;  ///< raw / 1000, the customary reporting unit
};

SadResult sad(const AlphaMatte& pred, const AlphaMatte& gt);
double mse(const AlphaMatte& pred, const AlphaMatte& gt);
double mse(const ImageRGB& pred, const ImageRGB& gt);

/// 10*log10(1/MSE) on [0,1] data, capped at kPsnrCapDb.
double psnr_from_mse(double mse);
double psnr(const ImageRGB& pred, const ImageRGB& gt);

/// Sum over pixels of (|grad pred| - |grad gt|)^2 with Gaussian-derivative
/// filters of standard deviation sigma (replicated borders).
double gradient_error(const AlphaMatte& pred, const AlphaMatte& gt,
                      double sigma = kDefaultGradientSigma);

/// Temporal consistency over a sequence, alphas scaled to 0..255:
///   MAD = 1/N * sum_{n=1}^{N-1} 1/(w*h) * |sum(alpha_n) - sum(alpha_{n+1})|
/// The 1/N prefactor over N-1 terms is intentional.
double mad(const std::vector<AlphaMatte>& alphas);

struct EvaluationConfig {
  double gradient_sigma = kDefaultGradientSigma;
  SpillBlendMode spill_mode = SpillBlendMode::TextSemantics;
  std::string sequence_name = "sequence";
};

struct FrameMetrics {
  double psnr = 0.0;
  double sad_raw = 0.0;
  double sad = 0.0;
  double mse = 0.0;
  double gradient = 0.0;
};

struct MetricReport {
  std::string sequence_name;
  int frame_count = 0;
  int width = 0;
  int height = 0;
  bool has_ground_truth = false;
  std::vector<FrameMetrics> frames;  ///< empty without ground truth
  FrameMetrics mean;                 ///< arithmetic mean over frames
  double mad = 0.0;                  ///< sequence-level, predicted alphas
  std::string region = "full_frame";
  std::string prediction_composite = "matting_equation";
};

/// Composites predictions and ground truth over `bg` and scores them.
///
/// Ground truth is composited with the plain matting equation. Predictions are
/// composited with the spill-corrected blend when `orig_frames` (the camera
/// frames behind each prediction) are supplied, otherwise with the matting
/// equation. Without ground truth only MAD is reported.
MetricReport evaluate_sequence(const std::vector<RgbaForeground>& pred,
                               const std::optional<std::vector<RgbaForeground>>& gt,
                               const ImageRGB& bg, const EvaluationConfig& config = {},
                               const std::vector<ImageRGB>* orig_frames = nullptr);

std::string report_to_json(const MetricReport& report, int indent = 2);

}  // namespace duplexmat
