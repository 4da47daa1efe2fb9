#pragma once

// Domain types shared across the library: camera, pose, Gaussian keypoints,
// object model and confidence ellipsoids. Euler angles are intrinsic ZYX
// (yaw about Z, then pitch about Y, then roll about X), in radians.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace confpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMinDepth = 1e-9;
inline constexpr double kGimbalTolerance = 1e-6;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
};

struct Pose6D {
  Vec3 euler = Vec3::Zero();        // yaw, pitch, roll
  Vec3 translation = Vec3::Zero();  // meters

  Vec6 vector() const;
  static Pose6D from_vector(const Vec6& y);
};

struct GaussianKeypoint {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
};

using GaussianKeypointSet = std::vector<GaussianKeypoint>;
using Keypoints2d = std::vector<Vec2>;

struct ObjectModel {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  /// Requires N >= 4 and a rank-3 centered point matrix.
  void validate() const;
};

/// {x : (x - center)^T shape^{-1} (x - center) <= scale}
struct Ellipsoid3 {
  Vec3 center = Vec3::Zero();
  Mat3 shape = Mat3::Identity();
  double scale = 1.0;

  double mahalanobis_squared(const Vec3& x) const;
  bool contains(const Vec3& x) const;
};

struct EulerAngles {
  Vec3 euler = Vec3::Zero();
  bool gimbal_lock = false;
};

/// R_z(yaw) * R_y(pitch) * R_x(roll).
Mat3 euler_to_matrix(const Vec3& euler);

/// Partial derivatives of euler_to_matrix with respect to yaw, pitch, roll.
std::array<Mat3, 3> euler_to_matrix_partials(const Vec3& euler);

/// Inverse of euler_to_matrix with pitch in [-pi/2, pi/2] and yaw, roll in
/// [-pi, pi). Within kGimbalTolerance of |pitch| = pi/2 the result is flagged,
/// yaw is pinned to zero and roll carries the coupled angle.
EulerAngles matrix_to_euler(const Mat3& rotation);

/// Wraps to [-pi, pi).
double wrap_angle(double radians);

/// Canonical Euler triple for the same rotation (wrapped, pitch folded).
Pose6D canonicalize(const Pose6D& pose);

/// Pinhole projection of a model point. Throws BehindCamera when the camera
/// frame depth is <= kMinDepth.
Vec2 project(const Vec3& point3d, const Pose6D& pose, const CameraIntrinsics& cam);

/// Projection together with its 2x6 Jacobian with respect to
/// (yaw, pitch, roll, tx, ty, tz).
Vec2 project_with_jacobian(const Vec3& point3d, const Pose6D& pose,
                           const CameraIntrinsics& cam, Mat26& jacobian);

/// observed - project(point3d, pose, cam), evaluated in extended precision so
/// that sub-1e-12 px residuals survive the subtraction at pixel magnitudes.
Vec2 reprojection_residual(const Vec2& observed, const Vec3& point3d, const Pose6D& pose,
                           const CameraIntrinsics& cam);
using Vec2L = Eigen::Matrix<long double, 2, 1>;
Vec2L reprojection_residual_extended(const Vec2& observed, const Vec3& point3d, const Pose6D& pose,
                                     const CameraIntrinsics& cam);

void validate_keypoint(const GaussianKeypoint& kp);
void validate_keypoint_set(const GaussianKeypointSet& set);

}  // namespace confpose
