#pragma once

// Implicit-function-theorem propagation of keypoint uncertainty to the pose.
//
// The pose y = g(x) minimizes O(x, y) = sum_n |x_n - pi_n(y)|^2. At a
// stationary point f(x, y) = dO/dy = 0, so
//   dg/dx = -[df/dy]^{-1} [df/dx]
// and a keypoint covariance Sigma_x maps to Sigma_y = J Sigma_x J^T.

#include <vector>

#include <Eigen/Core>

#include "confpose/conformal.hpp"
#include "confpose/core.hpp"
#include "confpose/pnp.hpp"

namespace confpose {

using PoseJacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

struct KeypointCovariance {
  std::vector<Mat2> blocks;
};

struct PoseCovariance {
  Mat6 full = Mat6::Zero();

  Mat3 rot_block() const { return full.topLeftCorner<3, 3>(); }
  Mat3 trans_block() const { return full.bottomRightCorner<3, 3>(); }
};

enum class ScaleMode {
  Paper,  // region radius 1 in Mahalanobis units
  Chi2,   // chi-square(3) quantile at 1 - eps
};

enum class CovarianceSource {
  ConformalRadii,  // (r_n / kappa)^2 I per keypoint
  Predicted,       // the network's own covariance blocks
};

struct RegionOptions {
  ScaleMode scale_mode = ScaleMode::Chi2;
  CovarianceSource source = CovarianceSource::ConformalRadii;
  /// kappa <= 0 selects sqrt(chi2_2(1 - eps)).
  double kappa = 0.0;
  double stationarity_tol = 1e-6;
  double max_condition = 1e12;
};

struct PoseConfidenceRegion {
  Ellipsoid3 rotation;     // Euler angles, radians
  Ellipsoid3 translation;  // meters
  double epsilon = 0.0;
  ScaleMode scale_mode = ScaleMode::Chi2;
  double kappa = 1.0;
  PoseCovariance covariance;
  Pose6D linearization_pose;  // stationary point of O used for the Jacobian
};

/// dO/dy for the unweighted objective.
Vec6 constraint(const PnPProblem& problem, const Pose6D& pose);

/// Sum of squared reprojection errors.
double reprojection_objective(const PnPProblem& problem, const Pose6D& pose);

/// df/dy: Gauss-Newton part minus the residual curvature term (the latter by
/// central differences with residuals held fixed).
Mat6 dfdy(const PnPProblem& problem, const Pose6D& pose);

/// Split of dfdy into its two parts, for inspection.
struct DfdyParts {
  Mat6 gauss_newton;
  Mat6 curvature;  // 2 sum_n sum_k r_nk d2 pi_nk / dy2
};
DfdyParts dfdy_parts(const PnPProblem& problem, const Pose6D& pose);

/// df/dx, 6 x 2N; observation n only touches columns 2n and 2n + 1.
PoseJacobian dfdx(const PnPProblem& problem, const Pose6D& pose);

/// -dfdy^{-1} dfdx. Throws NotStationary when |f| exceeds
/// stationarity_tol * max(1, O) and IllConditioned above max_condition.
PoseJacobian pose_jacobian(const PnPProblem& problem, const Pose6D& pose,
                           double stationarity_tol = 1e-6, double max_condition = 1e12);

PoseCovariance propagate(const PoseJacobian& jacobian, const KeypointCovariance& kp_cov);

/// Minimizer of the unweighted objective started from `pose` (returns `pose`
/// itself if it is already stationary).
Pose6D least_squares_anchor(const PnPProblem& problem, const Pose6D& pose,
                            double stationarity_tol = 1e-6);

double default_kappa(double epsilon);

PoseConfidenceRegion region_from_conformal(const PnPProblem& problem, const PnPSolution& solution,
                                           const KeypointConfidenceRegion& region2d,
                                           double epsilon, const RegionOptions& options = {});

}  // namespace confpose
