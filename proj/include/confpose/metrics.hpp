#pragma once
// Coverage rates, ellipsoid volumes and distribution summaries.
//
// Rotation volumes are in deg^3 (Euler covariance converted from radians),
// translation volumes in m^3. An image whose region volume exceeds the
// threshold counts as not covered and is left out of the mean volume.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "confpose/conformal.hpp"
#include "confpose/core.hpp"
#include "confpose/ift.hpp"

namespace confpose {

struct Thresholds {
  double tau_R = 90.0 * 90.0 * 90.0;  // deg^3
  double tau_t = 1.0;                 // m^3
  void validate() const;
};

inline constexpr double kRadToDeg = 180.0 / kPi;

/// (4/3) pi sqrt(det(scale * shape)), in the ellipsoid's own units.
double ellipsoid_volume(const Ellipsoid3& e);
/// Volume of an Euler-angle ellipsoid (radians) expressed in deg^3.
double rotation_volume_deg3(const Ellipsoid3& e);

/// Per-axis shortest signed angle difference, each component in (-pi, pi].
Vec3 wrapped_angle_difference(const Vec3& a, const Vec3& b);
/// Membership of an Euler triple in an Euler ellipsoid after wrapping.
bool rotation_contains(const Ellipsoid3& e, const Vec3& euler);

double keypoint_coverage(const std::vector<KeypointConfidenceRegion>& regions,
                         const std::vector<Keypoints2d>& gts);

struct PoseCoverage {
  double eta_R = 0.0;
  double eta_t = 0.0;
  std::size_t out_R = 0;
  std::size_t out_t = 0;
};

PoseCoverage pose_coverage(const std::vector<PoseConfidenceRegion>& regions,
                           const std::vector<Pose6D>& gt_poses, const Thresholds& th);

// One evaluated image. A failed image (solver or propagation error) has no
// volumes and counts as uncovered for both rotation and translation.
struct ImageResult {
  bool failed = false;
  bool keypoints_covered = false;
  bool rotation_inside = false;
  bool translation_inside = false;
  double V_R = 0.0;  // deg^3
  double V_t = 0.0;  // m^3
  std::vector<double> radii;
};

ImageResult evaluate_image(const KeypointConfidenceRegion& region2d, const Keypoints2d& gt_keypoints,
                           const PoseConfidenceRegion& region, const Pose6D& gt_pose);

struct EvaluationReport {
  std::size_t images = 0;
  std::size_t failed = 0;
  double eta_kpt = 0.0;
  double eta_R = 0.0;
  double eta_t = 0.0;
  std::optional<double> mean_V_R;  // empty when every image is over threshold
  std::optional<double> mean_V_t;
  std::size_t out_R = 0;
  std::size_t out_t = 0;
  std::vector<double> radii_stats;  // mean radius per keypoint index
  std::vector<std::pair<double, double>> volume_samples;  // (V_R, V_t), non-failed images
};

EvaluationReport summarize(const std::vector<ImageResult>& per_image, const Thresholds& th);

struct BoxplotSummary {
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double whisker_low = 0.0, whisker_high = 0.0;  // extreme data within 1.5 IQR
  std::vector<double> outliers;
};

/// Linear-interpolation quantile of sorted data, p in [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double p);
BoxplotSummary boxplot(std::vector<double> samples);

/// Columnar CDF export: a '#' header line, then "value cumulative_fraction".
void write_cdf(std::ostream& out, std::vector<double> samples, const std::string& header);
void write_boxplot(std::ostream& out, const BoxplotSummary& box, const std::string& header);

}  // namespace confpose
