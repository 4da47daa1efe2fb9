#include "confpose/ift.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "confpose/error.hpp"
#include "confpose/stats.hpp"

namespace confpose {

namespace {

// sum_n J_n(y)^T r_n with the residuals supplied by the caller
Vec6 jacobian_residual_product(const PnPProblem& problem, const Pose6D& pose,
                               const std::vector<Vec2>& residuals) {
  Vec6 acc = Vec6::Zero();
  Mat26 jac;
  for (std::size_t n = 0; n < problem.size(); ++n) {
    project_with_jacobian(problem.model.points[n], pose, problem.cam, jac);
    acc += jac.transpose() * residuals[n];
  }
  return acc;
}

std::vector<Vec2> residuals_at(const PnPProblem& problem, const Pose6D& pose) {
  std::vector<Vec2> r(problem.size());
  for (std::size_t n = 0; n < problem.size(); ++n) r[n] = residual(problem, pose, n);
  return r;
}

}  // namespace

Vec6 constraint(const PnPProblem& problem, const Pose6D& pose) {
  return -2.0 * jacobian_residual_product(problem, pose, residuals_at(problem, pose));
}

double reprojection_objective(const PnPProblem& problem, const Pose6D& pose) {
  double o = 0.0;
  for (std::size_t n = 0; n < problem.size(); ++n) o += residual(problem, pose, n).squaredNorm();
  return o;
}

DfdyParts dfdy_parts(const PnPProblem& problem, const Pose6D& pose) {
  DfdyParts parts;
  parts.gauss_newton.setZero();
  Mat26 jac;
  for (std::size_t n = 0; n < problem.size(); ++n) {
    project_with_jacobian(problem.model.points[n], pose, problem.cam, jac);
    parts.gauss_newton += 2.0 * jac.transpose() * jac;
  }

  const std::vector<Vec2> frozen = residuals_at(problem, pose);
  const Vec6 y = pose.vector();
  Mat6 second;
  for (int j = 0; j < 6; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(y(j)));
    Vec6 yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    second.col(j) = (jacobian_residual_product(problem, Pose6D::from_vector(yp), frozen) -
                     jacobian_residual_product(problem, Pose6D::from_vector(ym), frozen)) /
                    (2.0 * h);
  }
  parts.curvature = second + second.transpose();  // 2 * symmetric part
  return parts;
}

Mat6 dfdy(const PnPProblem& problem, const Pose6D& pose) {
  const DfdyParts parts = dfdy_parts(problem, pose);
  return parts.gauss_newton - parts.curvature;
}

PoseJacobian dfdx(const PnPProblem& problem, const Pose6D& pose) {
  const auto n_pts = static_cast<Eigen::Index>(problem.size());
  PoseJacobian out = PoseJacobian::Zero(6, 2 * n_pts);
  Mat26 jac;
  for (Eigen::Index n = 0; n < n_pts; ++n) {
    project_with_jacobian(problem.model.points[static_cast<std::size_t>(n)], pose, problem.cam, jac);
    out.middleCols<2>(2 * n) = -2.0 * jac.transpose();
  }
  return out;
}

PoseJacobian pose_jacobian(const PnPProblem& problem, const Pose6D& pose,
                           double stationarity_tol, double max_condition) {
  problem.validate();
  const double scale = std::max(1.0, reprojection_objective(problem, pose));
  const double fnorm = constraint(problem, pose).norm();
  if (fnorm > stationarity_tol * scale) {
    std::ostringstream os;
    os << "|f| = " << fnorm << " exceeds " << stationarity_tol * scale;
    fail(ErrorCode::NotStationary, os.str());
  }
  const Mat6 a = dfdy(problem, pose);
  Eigen::JacobiSVD<Mat6> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cond = sv(5) > 0.0 ? sv(0) / sv(5) : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) {
    std::ostringstream os;
    os << "df/dy condition number " << cond << " exceeds " << max_condition;
    fail(ErrorCode::IllConditioned, os.str());
  }
  return -svd.solve(dfdx(problem, pose));
}

PoseCovariance propagate(const PoseJacobian& jacobian, const KeypointCovariance& kp_cov) {
  if (jacobian.cols() != 2 * static_cast<Eigen::Index>(kp_cov.blocks.size()))
    fail(ErrorCode::DimensionMismatch, "Jacobian has " + std::to_string(jacobian.cols()) +
                                           " columns for " + std::to_string(kp_cov.blocks.size()) +
                                           " keypoint blocks");
  Mat6 full = Mat6::Zero();
  for (std::size_t n = 0; n < kp_cov.blocks.size(); ++n) {
    const auto cols = jacobian.middleCols<2>(2 * static_cast<Eigen::Index>(n));
    full += cols * kp_cov.blocks[n] * cols.transpose();
  }
  full = 0.5 * (full + full.transpose()).eval();

  // clip round-off negatives to keep the result PSD
  Eigen::SelfAdjointEigenSolver<Mat6> eig(full);
  Vec6 values = eig.eigenvalues();
  const double floor = -1e-12 * std::max(full.trace(), 0.0);
  bool clipped = false;
  for (int k = 0; k < 6; ++k) {
    if (values(k) < 0.0 && values(k) >= floor) {
      values(k) = 0.0;
      clipped = true;
    }
  }
  PoseCovariance out;
  if (clipped) {
    out.full = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    out.full = 0.5 * (out.full + out.full.transpose()).eval();
  } else {
    out.full = full;
  }
  return out;
}

Pose6D least_squares_anchor(const PnPProblem& problem, const Pose6D& pose,
                            double stationarity_tol) {
  const double scale = std::max(1.0, reprojection_objective(problem, pose));
  if (constraint(problem, pose).norm() <= stationarity_tol * scale) return pose;
  return solve(problem, pose, least_squares_config()).pose;
}

double default_kappa(double epsilon) {
  return std::sqrt(chi_square_quantile(2, 1.0 - epsilon));
}

PoseConfidenceRegion region_from_conformal(const PnPProblem& problem, const PnPSolution& solution,
                                           const KeypointConfidenceRegion& region2d,
                                           double epsilon, const RegionOptions& options) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    fail(ErrorCode::InvalidArgument, "epsilon must lie in (0, 1)");
  if (!solution.converged) fail(ErrorCode::NotStationary, "PnP solution did not converge");
  if (region2d.size() != problem.size())
    fail(ErrorCode::LengthMismatch, "keypoint region does not match the problem size");

  PoseConfidenceRegion out;
  out.epsilon = epsilon;
  out.scale_mode = options.scale_mode;
  out.kappa = options.kappa > 0.0 ? options.kappa : default_kappa(epsilon);

  KeypointCovariance kp_cov;
  kp_cov.blocks.reserve(problem.size());
  for (std::size_t n = 0; n < problem.size(); ++n) {
    if (options.source == CovarianceSource::Predicted) {
      kp_cov.blocks.push_back(problem.observations[n].cov);
      continue;
    }
    const double r = region2d.radii[n];
    if (!std::isfinite(r) || !(r > 0.0))
      fail(ErrorCode::InvalidArgument, "keypoint region radii must be finite and positive");
    const double sd = r / out.kappa;
    kp_cov.blocks.push_back(sd * sd * Mat2::Identity());
  }

  out.linearization_pose = least_squares_anchor(problem, solution.pose, options.stationarity_tol);
  const PoseJacobian jac = pose_jacobian(problem, out.linearization_pose,
                                         options.stationarity_tol, options.max_condition);
  out.covariance = propagate(jac, kp_cov);

  const double scale =
      options.scale_mode == ScaleMode::Paper ? 1.0 : chi_square_quantile(3, 1.0 - epsilon);
  out.rotation = {solution.pose.euler, out.covariance.rot_block(), scale};
  out.translation = {solution.pose.translation, out.covariance.trans_block(), scale};
  return out;
}

}  // namespace confpose
