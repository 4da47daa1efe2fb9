#pragma once
// Per-image evaluation: keypoint regions -> PnP -> pose regions (ellipsoid
// and/or sampling hull) -> coverage and volume metrics, plus the JSON report
// and the columnar exports.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confpose/io.hpp"
#include "confpose/ift.hpp"
#include "confpose/metrics.hpp"
#include "confpose/pnp.hpp"

namespace confpose {

enum class EvalMode { Deterministic, Sampling, Both };

const char* eval_mode_name(EvalMode m) noexcept;
const char* scale_mode_name(ScaleMode m) noexcept;

struct EvaluateOptions {
  EvalMode mode = EvalMode::Deterministic;
  ScaleMode scale = ScaleMode::Chi2;
  Thresholds thresholds;
  std::size_t sampler_trials = 1000;
  std::uint64_t sampler_seed = 0;
  unsigned jobs = 1;
  SolverConfig solver;
};

struct StageTimes {
  double predict_ms = 0.0;
  double solve_ms = 0.0;
  double region_ms = 0.0;
  double sampling_ms = 0.0;
  double deterministic_ms() const { return predict_ms + solve_ms + region_ms; }
  StageTimes& operator+=(const StageTimes& o);
};

struct ImageEvaluation {
  std::size_t index = 0;
  bool keypoints_covered = false;
  double mean_radius = 0.0;
  std::size_t capped = 0;

  std::string deterministic_error;  // empty on success
  ImageResult deterministic;
  int solver_iterations = 0;
  double solver_cost = 0.0;

  std::string sampling_error;
  ImageResult sampling;
  std::size_t accepted = 0;
  std::size_t attempted = 0;

  StageTimes times;
};

struct EvaluationRun {
  EvaluateOptions options;
  double epsilon = 0.0;
  double scale_exponent = 0.0;
  double quantile = 0.0;
  double kappa = 0.0;
  double ellipsoid_scale = 0.0;
  std::size_t calibration_size = 0;
  std::string content_hash;
  std::optional<SceneConfig> generator;
  std::vector<ImageEvaluation> images;
  std::optional<EvaluationReport> deterministic;
  std::optional<EvaluationReport> sampling;
  StageTimes total;
};

/// Throws ModelMismatch when the calibration was fitted on another model or
/// camera. Per-image solver failures are recorded, not thrown.
EvaluationRun evaluate_dataset(const Dataset& ds, const CalibrationFile& cal, const EvaluateOptions& opt);

ImageEvaluation evaluate_one(const Dataset& ds, std::size_t index, double quantile, double scale_exponent,
                             double epsilon, const EvaluateOptions& opt);

std::string report_json(const EvaluationRun& run, bool include_timing);

/// Writes <prefix>.<mode>.<quantity>.{cdf,box}.txt for each evaluated mode;
/// returns the paths written.
std::vector<std::string> write_exports(const EvaluationRun& run, const std::string& prefix);

}  // namespace confpose
