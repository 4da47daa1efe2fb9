#pragma once

// Synthetic scenes standing in for a trained keypoint regressor: a random
// object model, random poses, exact projections and heteroscedastic Gaussian
// pixel noise. Predicted covariances are the true noise variance times
// cov_misspecification (1 = honest).

#include <cstddef>
#include <cstdint>
#include <vector>

#include "confpose/conformal.hpp"
#include "confpose/core.hpp"
#include "confpose/pnp.hpp"

namespace confpose {

struct SceneConfig {
  int n_keypoints = 11;
  double model_extent = 0.5;  // m, side of the cube the model points fill
  double depth_min = 2.0;
  double depth_max = 6.0;
  double max_rotation_deg = 60.0;
  double noise_std_min = 0.3;  // px
  double noise_std_max = 2.0;
  double cov_misspecification = 1.0;
  std::uint64_t rng_seed = 0;    // poses and noise
  std::uint64_t model_seed = 0;  // object model; shared by calibration and test splits

  double focal = 800.0;
  int image_width = 1024;
  int image_height = 1024;

  void validate() const;
  CameraIntrinsics camera() const;
  double image_diagonal() const;
};

struct SyntheticSample {
  Pose6D gt_pose;
  Keypoints2d gt_keypoints2d;
  GaussianKeypointSet predicted;
  std::vector<double> noise_std;  // true per-keypoint std, px
};

struct SyntheticDataset {
  CameraIntrinsics cam;
  ObjectModel model;
  double image_diagonal = 0.0;
  std::vector<SyntheticSample> samples;

  PnPProblem problem(std::size_t i) const;
  std::vector<CalibrationSample> calibration_samples() const;
};

inline constexpr int kMaxPoseRejections = 10000;
inline constexpr double kMinPredictedStd = 1e-6;

/// SplitMix64 mix of (seed, stream): independent sub-seeds for splits and
/// per-sample generators.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

ObjectModel generate_model(const SceneConfig& cfg);

/// Sample i depends only on (cfg, i), so datasets are prefix-stable.
SyntheticDataset generate(const SceneConfig& cfg, std::size_t count);

/// Draws a sample for an existing model (used for scenes sharing a model).
SyntheticSample generate_sample(const SceneConfig& cfg, const ObjectModel& model,
                                std::uint64_t sample_seed);

}  // namespace confpose
