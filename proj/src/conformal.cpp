#include "confpose/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/LU>

#include "confpose/error.hpp"

namespace confpose {

double keypoint_scale(const GaussianKeypoint& kp, double scale_exponent) {
  const double det = kp.cov.determinant();
  if (!(det > 0.0) || !std::isfinite(det))
    fail(ErrorCode::DegenerateCovariance, "covariance determinant must be positive");
  return std::pow(det, scale_exponent);
}

double nonconformity(const Keypoints2d& gt, const GaussianKeypointSet& pred,
                     double scale_exponent) {
  if (gt.size() != pred.size())
    fail(ErrorCode::LengthMismatch, "ground truth has " + std::to_string(gt.size()) +
                                        " keypoints, prediction has " +
                                        std::to_string(pred.size()));
  double score = 0.0;
  for (std::size_t n = 0; n < gt.size(); ++n) {
    const double s = keypoint_scale(pred[n], scale_exponent);
    score = std::max(score, (gt[n] - pred[n].mean).norm() / s);
  }
  return score;
}

CalibrationModel calibration_from_scores(std::vector<double> scores, double scale_exponent) {
  if (scores.empty()) fail(ErrorCode::InvalidArgument, "calibration set is empty");
  for (double s : scores)
    if (!(s >= 0.0) || !std::isfinite(s))
      fail(ErrorCode::InvalidArgument, "calibration scores must be finite and non-negative");
  std::stable_sort(scores.begin(), scores.end(), std::greater<>());
  return {std::move(scores), scale_exponent};
}

CalibrationModel calibrate(const std::vector<CalibrationSample>& dataset,
                           double scale_exponent) {
  if (dataset.empty()) fail(ErrorCode::InvalidArgument, "calibration set is empty");
  std::vector<double> scores;
  scores.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    try {
      scores.push_back(nonconformity(dataset[i].gt, dataset[i].predicted, scale_exponent));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (calibration sample " +
                                std::to_string(i) + ")");
    }
  }
  return calibration_from_scores(std::move(scores), scale_exponent);
}

std::size_t quantile_rank(std::size_t l, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    fail(ErrorCode::InvalidArgument, "epsilon must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(static_cast<double>(l) * epsilon));
}

double quantile(const CalibrationModel& model, double epsilon) {
  const std::size_t k = quantile_rank(model.size(), epsilon);
  if (k == 0)
    fail(ErrorCode::EpsilonTooSmall,
         "floor(l*eps) = 0 for l = " + std::to_string(model.size()) +
             "; enlarge the calibration set or epsilon");
  return model.scores[k - 1];
}

KeypointConfidenceRegion region_from_quantile(const GaussianKeypointSet& pred,
                                              double scale_exponent, double alpha,
                                              double image_diagonal) {
  if (!(image_diagonal > 0.0)) fail(ErrorCode::InvalidArgument, "image diagonal must be positive");
  KeypointConfidenceRegion region;
  region.centers.reserve(pred.size());
  region.radii.reserve(pred.size());
  region.capped.reserve(pred.size());
  for (const auto& kp : pred) {
    const double r = keypoint_scale(kp, scale_exponent) * alpha;
    region.centers.push_back(kp.mean);
    region.radii.push_back(std::clamp(r, kMinRegionRadius, image_diagonal));
    region.capped.push_back(r > image_diagonal);
  }
  return region;
}

KeypointConfidenceRegion predict_region(const GaussianKeypointSet& pred,
                                        const CalibrationModel& model, double epsilon,
                                        double image_diagonal) {
  return region_from_quantile(pred, model.scale_exponent, quantile(model, epsilon),
                              image_diagonal);
}

bool contains(const KeypointConfidenceRegion& region, const Keypoints2d& gt) {
  if (gt.size() != region.size())
    fail(ErrorCode::LengthMismatch, "region and ground truth keypoint counts differ");
  for (std::size_t n = 0; n < gt.size(); ++n)
    if (!((gt[n] - region.centers[n]).norm() <= region.radii[n])) return false;
  return true;
}

}  // namespace confpose
