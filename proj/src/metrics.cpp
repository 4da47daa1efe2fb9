#include "confpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include <Eigen/LU>

#include "confpose/error.hpp"

namespace confpose {

void Thresholds::validate() const {
  if (!(tau_R > 0.0) || !(tau_t > 0.0)) fail(ErrorCode::InvalidArgument, "thresholds must be positive");
}

double ellipsoid_volume(const Ellipsoid3& e) {
  const double det = e.shape.determinant();
  if (!(det > 0.0) || !(e.scale > 0.0))
    fail(ErrorCode::DegenerateShape, "ellipsoid shape has non-positive determinant");
  return 4.0 / 3.0 * kPi * std::pow(e.scale, 1.5) * std::sqrt(det);
}

double rotation_volume_deg3(const Ellipsoid3& e) {
  return ellipsoid_volume(e) * kRadToDeg * kRadToDeg * kRadToDeg;
}

Vec3 wrapped_angle_difference(const Vec3& a, const Vec3& b) {
  Vec3 d;
  for (int k = 0; k < 3; ++k) {
    // wrap_angle maps into [-pi, pi); flip the lower end to land in (-pi, pi]
    d(k) = wrap_angle(a(k) - b(k));
    if (d(k) <= -kPi) d(k) += 2.0 * kPi;
  }
  return d;
}

bool rotation_contains(const Ellipsoid3& e, const Vec3& euler) {
  return e.contains(e.center + wrapped_angle_difference(euler, e.center));
}

double keypoint_coverage(const std::vector<KeypointConfidenceRegion>& regions,
                         const std::vector<Keypoints2d>& gts) {
  if (regions.size() != gts.size())
    fail(ErrorCode::LengthMismatch, "regions and ground truths differ in length");
  if (regions.empty()) fail(ErrorCode::InvalidArgument, "keypoint coverage needs at least one image");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) covered += contains(regions[i], gts[i]) ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(regions.size());
}

PoseCoverage pose_coverage(const std::vector<PoseConfidenceRegion>& regions,
                           const std::vector<Pose6D>& gt_poses, const Thresholds& th) {
  th.validate();
  if (regions.size() != gt_poses.size())
    fail(ErrorCode::LengthMismatch, "regions and ground-truth poses differ in length");
  if (regions.empty()) fail(ErrorCode::InvalidArgument, "pose coverage needs at least one image");
  PoseCoverage out;
  std::size_t covered_R = 0, covered_t = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const bool over_R = rotation_volume_deg3(regions[i].rotation) > th.tau_R;
    const bool over_t = ellipsoid_volume(regions[i].translation) > th.tau_t;
    out.out_R += over_R;
    out.out_t += over_t;
    if (!over_R && rotation_contains(regions[i].rotation, gt_poses[i].euler)) ++covered_R;
    if (!over_t && regions[i].translation.contains(gt_poses[i].translation)) ++covered_t;
  }
  const double n = static_cast<double>(regions.size());
  out.eta_R = covered_R / n;
  out.eta_t = covered_t / n;
  return out;
}

ImageResult evaluate_image(const KeypointConfidenceRegion& region2d, const Keypoints2d& gt_keypoints,
                           const PoseConfidenceRegion& region, const Pose6D& gt_pose) {
  ImageResult r;
  r.keypoints_covered = contains(region2d, gt_keypoints);
  r.rotation_inside = rotation_contains(region.rotation, gt_pose.euler);
  r.translation_inside = region.translation.contains(gt_pose.translation);
  r.V_R = rotation_volume_deg3(region.rotation);
  r.V_t = ellipsoid_volume(region.translation);
  r.radii = region2d.radii;
  return r;
}

EvaluationReport summarize(const std::vector<ImageResult>& per_image, const Thresholds& th) {
  th.validate();
  if (per_image.empty()) fail(ErrorCode::InvalidArgument, "nothing to summarize");
  EvaluationReport rep;
  rep.images = per_image.size();
  std::size_t kpt = 0, cov_R = 0, cov_t = 0, in_R = 0, in_t = 0;
  double sum_R = 0.0, sum_t = 0.0;
  std::vector<double> radius_sum;
  std::vector<std::size_t> radius_count;
  for (const auto& img : per_image) {
    kpt += img.keypoints_covered;
    if (img.radii.size() > radius_sum.size()) {
      radius_sum.resize(img.radii.size(), 0.0);
      radius_count.resize(img.radii.size(), 0);
    }
    for (std::size_t n = 0; n < img.radii.size(); ++n) {
      radius_sum[n] += img.radii[n];
      ++radius_count[n];
    }
    if (img.failed) {
      ++rep.failed;
      continue;
    }
    rep.volume_samples.emplace_back(img.V_R, img.V_t);
    if (img.V_R > th.tau_R) {
      ++rep.out_R;
    } else {
      sum_R += img.V_R;
      ++in_R;
      cov_R += img.rotation_inside;
    }
    if (img.V_t > th.tau_t) {
      ++rep.out_t;
    } else {
      sum_t += img.V_t;
      ++in_t;
      cov_t += img.translation_inside;
    }
  }
  const double n = static_cast<double>(rep.images);
  rep.eta_kpt = kpt / n;
  rep.eta_R = cov_R / n;
  rep.eta_t = cov_t / n;
  if (in_R > 0) rep.mean_V_R = sum_R / static_cast<double>(in_R);
  if (in_t > 0) rep.mean_V_t = sum_t / static_cast<double>(in_t);
  for (std::size_t k = 0; k < radius_sum.size(); ++k)
    rep.radii_stats.push_back(radius_sum[k] / static_cast<double>(radius_count[k]));
  return rep;
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxplotSummary boxplot(std::vector<double> samples) {
  if (samples.empty()) fail(ErrorCode::InvalidArgument, "boxplot of an empty sample");
  std::sort(samples.begin(), samples.end());
  BoxplotSummary b;
  b.count = samples.size();
  b.min = samples.front();
  b.max = samples.back();
  b.q1 = sorted_quantile(samples, 0.25);
  b.median = sorted_quantile(samples, 0.5);
  b.q3 = sorted_quantile(samples, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.max;
  b.whisker_high = b.min;
  for (double v : samples) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  return b;
}

void write_cdf(std::ostream& out, std::vector<double> samples, const std::string& header) {
  std::sort(samples.begin(), samples.end());
  out << "# " << header << '\n' << std::setprecision(17);
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out << samples[i] << ' ' << static_cast<double>(i + 1) / n << '\n';
}

void write_boxplot(std::ostream& out, const BoxplotSummary& b, const std::string& header) {
  out << "# " << header << '\n' << std::setprecision(17);
  out << "count " << b.count << '\n'
      << "min " << b.min << '\n'
      << "whisker_low " << b.whisker_low << '\n'
      << "q1 " << b.q1 << '\n'
      << "median " << b.median << '\n'
      << "q3 " << b.q3 << '\n'
      << "whisker_high " << b.whisker_high << '\n'
      << "max " << b.max << '\n';
  for (double v : b.outliers) out << "outlier " << v << '\n';
}

}  // namespace confpose
