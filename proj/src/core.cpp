#include "confpose/core.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "confpose/error.hpp"

namespace confpose {

namespace {

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

Mat3 drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Mat3 drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy)))
    fail(ErrorCode::InvalidArgument, "camera intrinsics must be finite");
  if (!(fx > 0.0 && fy > 0.0))
    fail(ErrorCode::InvalidArgument, "focal lengths must be positive");
}

Vec6 Pose6D::vector() const {
  Vec6 y;
  y << euler, translation;
  return y;
}

Pose6D Pose6D::from_vector(const Vec6& y) {
  Pose6D p;
  p.euler = y.head<3>();
  p.translation = y.tail<3>();
  return p;
}

void ObjectModel::validate() const {
  if (points.size() < 4)
    fail(ErrorCode::DegenerateModel, "object model needs at least 4 points");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) {
    if (!all_finite(p)) fail(ErrorCode::DegenerateModel, "non-finite model point");
    centroid += p;
  }
  centroid /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) scatter += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const double top = eig.eigenvalues()(2);
  if (!(top > 0.0) || eig.eigenvalues()(0) <= 1e-12 * top)
    fail(ErrorCode::DegenerateModel, "object model points are coplanar");
}

double Ellipsoid3::mahalanobis_squared(const Vec3& x) const {
  const Vec3 d = x - center;
  return d.dot(shape.ldlt().solve(d));
}

bool Ellipsoid3::contains(const Vec3& x) const { return mahalanobis_squared(x) <= scale; }

Mat3 euler_to_matrix(const Vec3& euler) {
  return rot_z(euler(0)) * rot_y(euler(1)) * rot_x(euler(2));
}

std::array<Mat3, 3> euler_to_matrix_partials(const Vec3& euler) {
  const Mat3 rz = rot_z(euler(0)), ry = rot_y(euler(1)), rx = rot_x(euler(2));
  return {drot_z(euler(0)) * ry * rx, rz * drot_y(euler(1)) * rx, rz * ry * drot_x(euler(2))};
}

double wrap_angle(double radians) {
  double w = std::fmod(radians + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod can land exactly on +pi after rounding
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

EulerAngles matrix_to_euler(const Mat3& r) {
  if (!r.allFinite() || (r.transpose() * r - Mat3::Identity()).norm() >= 1e-6 ||
      !(r.determinant() > 0.0))
    fail(ErrorCode::NotARotation, "matrix is not a proper rotation");

  EulerAngles out;
  const double cos_pitch = std::hypot(r(0, 0), r(1, 0));
  const double pitch = std::atan2(-r(2, 0), cos_pitch);
  if (kPi / 2.0 - std::abs(pitch) <= kGimbalTolerance) {
    out.gimbal_lock = true;
    out.euler << 0.0, pitch, wrap_angle(std::atan2(-r(1, 2), r(1, 1)));
    return out;
  }
  out.euler << wrap_angle(std::atan2(r(1, 0), r(0, 0))), pitch,
      wrap_angle(std::atan2(r(2, 1), r(2, 2)));
  return out;
}

Pose6D canonicalize(const Pose6D& pose) {
  Pose6D out = pose;
  out.euler = matrix_to_euler(euler_to_matrix(pose.euler)).euler;
  return out;
}

Vec2 project(const Vec3& point3d, const Pose6D& pose, const CameraIntrinsics& cam) {
  const Vec3 pc = euler_to_matrix(pose.euler) * point3d + pose.translation;
  if (!(pc(2) > kMinDepth)) {
    std::ostringstream os;
    os << "point depth " << pc(2) << " is not in front of the camera";
    fail(ErrorCode::BehindCamera, os.str());
  }
  return {cam.fx * pc(0) / pc(2) + cam.cx, cam.fy * pc(1) / pc(2) + cam.cy};
}

Vec2 project_with_jacobian(const Vec3& point3d, const Pose6D& pose,
                           const CameraIntrinsics& cam, Mat26& jacobian) {
  const Mat3 rot = euler_to_matrix(pose.euler);
  const Vec3 pc = rot * point3d + pose.translation;
  const double z = pc(2);
  if (!(z > kMinDepth)) {
    std::ostringstream os;
    os << "point depth " << z << " is not in front of the camera";
    fail(ErrorCode::BehindCamera, os.str());
  }
  Eigen::Matrix<double, 2, 3> dpi_dp;
  dpi_dp << cam.fx / z, 0.0, -cam.fx * pc(0) / (z * z),
            0.0, cam.fy / z, -cam.fy * pc(1) / (z * z);
  const auto partials = euler_to_matrix_partials(pose.euler);
  for (int k = 0; k < 3; ++k) jacobian.col(k) = dpi_dp * (partials[k] * point3d);
  jacobian.rightCols<3>() = dpi_dp;
  return {cam.fx * pc(0) / z + cam.cx, cam.fy * pc(1) / z + cam.cy};
}

Vec2 reprojection_residual(const Vec2& observed, const Vec3& point3d, const Pose6D& pose,
                           const CameraIntrinsics& cam) {
  return reprojection_residual_extended(observed, point3d, pose, cam).cast<double>();
}

Vec2L reprojection_residual_extended(const Vec2& observed, const Vec3& point3d, const Pose6D& pose,
                                     const CameraIntrinsics& cam) {
  using ld = long double;
  const ld cy = cosl(pose.euler(0)), sy = sinl(pose.euler(0));
  const ld cp = cosl(pose.euler(1)), sp = sinl(pose.euler(1));
  const ld cr = cosl(pose.euler(2)), sr = sinl(pose.euler(2));
  const ld px = point3d(0), py = point3d(1), pz = point3d(2);
  const ld x = cy * cp * px + (cy * sp * sr - sy * cr) * py + (cy * sp * cr + sy * sr) * pz +
               pose.translation(0);
  const ld y = sy * cp * px + (sy * sp * sr + cy * cr) * py + (sy * sp * cr - cy * sr) * pz +
               pose.translation(1);
  const ld z = -sp * px + cp * sr * py + cp * cr * pz + pose.translation(2);
  if (!(z > kMinDepth)) {
    std::ostringstream os;
    os << "point depth " << static_cast<double>(z) << " is not in front of the camera";
    fail(ErrorCode::BehindCamera, os.str());
  }
  const ld u = (static_cast<ld>(observed(0)) - cam.cx) - static_cast<ld>(cam.fx) * x / z;
  const ld v = (static_cast<ld>(observed(1)) - cam.cy) - static_cast<ld>(cam.fy) * y / z;
  return {u, v};
}

void validate_keypoint(const GaussianKeypoint& kp) {
  const Mat2& c = kp.cov;
  if (!kp.mean.allFinite() || !c.allFinite())
    fail(ErrorCode::DegenerateCovariance, "non-finite keypoint");
  if (std::abs(c(0, 1) - c(1, 0)) > 1e-12 * (std::abs(c(0, 0)) + std::abs(c(1, 1))))
    fail(ErrorCode::DegenerateCovariance, "keypoint covariance is not symmetric");
  if (!(c(0, 0) > 0.0) || !(c.determinant() > 0.0))
    fail(ErrorCode::DegenerateCovariance, "keypoint covariance is not positive definite");
}

void validate_keypoint_set(const GaussianKeypointSet& set) {
  if (set.size() < 4) fail(ErrorCode::InvalidArgument, "keypoint set needs at least 4 keypoints");
  for (const auto& kp : set) validate_keypoint(kp);
}

}  // namespace confpose
