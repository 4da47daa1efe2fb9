#pragma once

// Inductive conformal calibration of ball-shaped keypoint confidence regions.
//
// Each keypoint gets an uncertainty scale s_n = det(cov_n)^q. A sample's
// nonconformity is the largest scaled residual max_n |gt_n - mean_n| / s_n.
// Calibration keeps the sorted scores; at error rate eps the region radius is
// s_n times the floor(l*eps)-th largest calibration score.

#include <cstddef>
#include <utility>
#include <vector>

#include "confpose/core.hpp"

namespace confpose {

inline constexpr double kDefaultScaleExponent = 0.25;
/// Radii never drop below this (pixels); a zero calibration quantile would
/// otherwise yield a zero-size region and a singular pose covariance.
inline constexpr double kMinRegionRadius = 1e-9;

struct CalibrationModel {
  std::vector<double> scores;  // descending
  double scale_exponent = kDefaultScaleExponent;

  std::size_t size() const { return scores.size(); }
};

struct KeypointConfidenceRegion {
  std::vector<Vec2> centers;
  std::vector<double> radii;
  std::vector<bool> capped;  // true where the image-diagonal cap bound

  std::size_t size() const { return centers.size(); }
};

struct CalibrationSample {
  Keypoints2d gt;
  GaussianKeypointSet predicted;
};

double keypoint_scale(const GaussianKeypoint& kp, double scale_exponent);

double nonconformity(const Keypoints2d& gt, const GaussianKeypointSet& pred,
                     double scale_exponent);

CalibrationModel calibrate(const std::vector<CalibrationSample>& dataset,
                           double scale_exponent = kDefaultScaleExponent);

/// Builds a model from precomputed scores (sorted here).
CalibrationModel calibration_from_scores(std::vector<double> scores, double scale_exponent);

/// floor(l*eps) as used by quantile(); 0 means no finite-sample region exists.
std::size_t quantile_rank(std::size_t l, double epsilon);

double quantile(const CalibrationModel& model, double epsilon);

KeypointConfidenceRegion predict_region(const GaussianKeypointSet& pred,
                                        const CalibrationModel& model, double epsilon,
                                        double image_diagonal);

/// Same as predict_region with the quantile already resolved.
KeypointConfidenceRegion region_from_quantile(const GaussianKeypointSet& pred,
                                              double scale_exponent, double alpha,
                                              double image_diagonal);

/// Closed balls: every keypoint within its radius.
bool contains(const KeypointConfidenceRegion& region, const Keypoints2d& gt);

}  // namespace confpose
