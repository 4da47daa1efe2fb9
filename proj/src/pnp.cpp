#include "confpose/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confpose/error.hpp"

namespace confpose {

namespace {

constexpr double kMaxConditionNumber = 1e14;
constexpr double kMaxDamping = 1e16;
constexpr double kStepTolerance = 1e-10;

struct LinearizedCost {
  long double cost = 0.0L;  // compared across iterations; double is too coarse near the optimum
  Vec6 gradient = Vec6::Zero();
  Mat6 hessian = Mat6::Zero();
};

Mat2 weight_matrix(const GaussianKeypoint& kp, bool use_weights) {
  if (!use_weights) return Mat2::Identity();
  return kp.cov.inverse();
}

long double loss_value_extended(long double e, const SolverConfig& cfg) {
  if (cfg.loss == RobustLoss::Squared) return e;
  const long double delta = cfg.huber_delta;
  if (e <= delta) return 0.5L * e * e;
  return delta * (fabsl(e) - 0.5L * delta);
}

// first and second derivative of rho at e
std::pair<double, double> loss_derivatives(double e, const SolverConfig& cfg) {
  if (cfg.loss == RobustLoss::Squared) return {1.0, 0.0};
  if (e <= cfg.huber_delta) return {e, 1.0};
  return {cfg.huber_delta, 0.0};
}

LinearizedCost linearize(const PnPProblem& problem, const Pose6D& pose, const SolverConfig& cfg) {
  LinearizedCost out;
  Mat26 jac;
  for (std::size_t n = 0; n < problem.size(); ++n) {
    const auto& kp = problem.observations[n];
    project_with_jacobian(problem.model.points[n], pose, problem.cam, jac);
    const Vec2L r_ext = reprojection_residual_extended(kp.mean, problem.model.points[n], pose, problem.cam);
    const Vec2 r = r_ext.cast<double>();
    const Mat2 w = weight_matrix(kp, cfg.use_weights);
    const Vec2 wr = w * r;
    const long double e_ext = r_ext.dot(w.cast<long double>() * r_ext);
    const double e = static_cast<double>(e_ext);
    const auto [d1, d2] = loss_derivatives(e, cfg);
    // de/dy = -2 r^T W J
    const Eigen::Matrix<double, 1, 6> de = -2.0 * wr.transpose() * jac;
    out.cost += loss_value_extended(e_ext, cfg);
    out.gradient += d1 * de.transpose();
    out.hessian += 2.0 * d1 * jac.transpose() * w * jac + d2 * de.transpose() * de;
  }
  return out;
}

bool all_in_front(const PnPProblem& problem, const Pose6D& pose) {
  const Mat3 rot = euler_to_matrix(pose.euler);
  for (const auto& p : problem.model.points)
    if (!((rot * p + pose.translation)(2) > kMinDepth)) return false;
  return true;
}

// Rotation R minimizing sum |R a_i - b_i|^2 for centered point sets.
Mat3 procrustes(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) cross += b[i] * a[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0))
    fail(ErrorCode::DegenerateModel, "Procrustes system is rank deficient");
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace

void PnPProblem::validate() const {
  cam.validate();
  model.validate();
  if (model.size() != observations.size())
    fail(ErrorCode::LengthMismatch, "model has " + std::to_string(model.size()) +
                                        " points but " + std::to_string(observations.size()) +
                                        " observations were given");
  validate_keypoint_set(observations);
}

void SolverConfig::validate() const {
  if (!(huber_delta > 0.0) || max_iters < 1 || !(grad_tol > 0.0) || !(initial_damping > 0.0))
    fail(ErrorCode::InvalidArgument, "solver configuration values must be positive");
}

SolverConfig least_squares_config() {
  SolverConfig cfg;
  cfg.use_weights = false;
  cfg.loss = RobustLoss::Squared;
  return cfg;
}

const char* termination_name(Termination t) noexcept {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::StepTolerance: return "step_tolerance";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::NoProgress: return "no_progress";
  }
  return "unknown";
}

double huber(double e, double delta) {
  if (e <= delta) return 0.5 * e * e;
  return delta * (std::abs(e) - 0.5 * delta);
}

Vec2 residual(const PnPProblem& problem, const Pose6D& pose, std::size_t n) {
  if (n >= problem.size()) fail(ErrorCode::InvalidArgument, "correspondence index out of range");
  return reprojection_residual(problem.observations[n].mean, problem.model.points[n], pose,
                               problem.cam);
}

double weighted_cost(const PnPProblem& problem, const Pose6D& pose, const SolverConfig& cfg) {
  long double cost = 0.0L;
  for (std::size_t n = 0; n < problem.size(); ++n) {
    const auto& kp = problem.observations[n];
    if (cfg.use_weights) validate_keypoint(kp);
    const Vec2L r = reprojection_residual_extended(kp.mean, problem.model.points[n], pose, problem.cam);
    cost += loss_value_extended(r.dot(weight_matrix(kp, cfg.use_weights).cast<long double>() * r), cfg);
  }
  return static_cast<double>(cost);
}

Vec6 cost_gradient(const PnPProblem& problem, const Pose6D& pose, const SolverConfig& cfg) {
  return linearize(problem, pose, cfg).gradient;
}

PnPSolution solve(const PnPProblem& problem, const Pose6D& init, const SolverConfig& cfg) {
  problem.validate();
  cfg.validate();
  if (!all_in_front(problem, init))
    fail(ErrorCode::AllPointsBehindCamera, "initial pose places model points behind the camera");

  Vec6 y = init.vector();
  LinearizedCost current = linearize(problem, init, cfg);
  double damping = cfg.initial_damping;

  PnPSolution sol;
  sol.cost_trace.push_back(static_cast<double>(current.cost));
  sol.termination = Termination::MaxIterations;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (current.gradient.norm() == 0.0) {
      sol.termination = Termination::GradientTolerance;
      break;
    }
    // The gradient alone is a weak test here: on the Huber quadratic branch
    // the cost is quartic in the residual, and with noise the gradient
    // bottoms out at the floating-point resolution of y. A vanishing
    // undamped Newton step is the stationarity test instead.
    Eigen::LDLT<Mat6> newton(current.hessian);
    if (newton.info() == Eigen::Success && newton.isPositive()) {
      const Vec6 full_step = newton.solve(-current.gradient);
      if (full_step.allFinite() && full_step.norm() <= kStepTolerance * (1.0 + y.norm())) {
        const Pose6D last = Pose6D::from_vector(y + full_step);
        if (all_in_front(problem, last)) {
          LinearizedCost trial = linearize(problem, last, cfg);
          if (trial.cost <= current.cost) {
            y += full_step;
            current = trial;
            sol.cost_trace.push_back(static_cast<double>(current.cost));
          }
        }
        sol.termination = Termination::StepTolerance;
        break;
      }
    }

    Mat6 damped = current.hessian;
    const double diag_floor = 1e-12 * current.hessian.diagonal().maxCoeff();
    for (int k = 0; k < 6; ++k)
      damped(k, k) += damping * std::max(current.hessian(k, k), diag_floor);

    Eigen::SelfAdjointEigenSolver<Mat6> eig(damped);
    const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(5);
    if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
      if (damping < kMaxDamping && lo > 0.0) {
        damping *= 10.0;
        continue;
      }
      fail(ErrorCode::SingularNormalEquations, "damped normal equations are singular");
    }
    const Vec6 step = -eig.eigenvectors() *
                      (eig.eigenvectors().transpose() * current.gradient)
                          .cwiseQuotient(eig.eigenvalues());

    const Pose6D trial_pose = Pose6D::from_vector(y + step);
    bool accepted = false;
    if (all_in_front(problem, trial_pose)) {
      LinearizedCost trial = linearize(problem, trial_pose, cfg);
      if (std::isfinite(static_cast<double>(trial.cost)) && trial.cost <= current.cost) {
        y += step;
        current = trial;
        sol.cost_trace.push_back(static_cast<double>(current.cost));
        damping = std::max(damping / 10.0, 1e-15);
        accepted = true;
      }
    }
    if (!accepted) {
      damping *= 10.0;
      if (damping > kMaxDamping) {
        sol.termination = Termination::NoProgress;
        break;
      }
    }
  }

  sol.pose = canonicalize(Pose6D::from_vector(y));
  sol.final_cost = static_cast<double>(current.cost);
  sol.iterations = it;
  sol.gradient_norm = current.gradient.norm();
  if ((sol.termination == Termination::MaxIterations ||
       sol.termination == Termination::NoProgress) &&
      sol.gradient_norm <= cfg.grad_tol * std::max(1.0, sol.final_cost))
    sol.termination = Termination::GradientTolerance;
  sol.converged = sol.termination == Termination::GradientTolerance ||
                  sol.termination == Termination::StepTolerance;
  return sol;
}

Pose6D initial_pose(const PnPProblem& problem) {
  problem.validate();
  const std::size_t n_pts = problem.size();
  const auto& cam = problem.cam;

  Vec3 model_centroid = Vec3::Zero();
  for (const auto& p : problem.model.points) model_centroid += p;
  model_centroid /= static_cast<double>(n_pts);
  Vec2 image_centroid = Vec2::Zero();
  for (const auto& kp : problem.observations) image_centroid += kp.mean;
  image_centroid /= static_cast<double>(n_pts);

  double model_spread = 0.0, image_spread = 0.0;
  for (std::size_t n = 0; n < n_pts; ++n) {
    model_spread += (problem.model.points[n] - model_centroid).squaredNorm();
    image_spread += (problem.observations[n].mean - image_centroid).squaredNorm();
  }
  model_spread = std::sqrt(model_spread / static_cast<double>(n_pts));
  image_spread = std::sqrt(image_spread / static_cast<double>(n_pts));
  if (!(image_spread > 1e-9))
    fail(ErrorCode::DegenerateModel, "observations have no image spread");

  // projected RMS radius of an isotropic 3D cloud is sqrt(2/3) of its 3D RMS radius
  const double focal = 0.5 * (cam.fx + cam.fy);
  const double depth = focal * model_spread * std::sqrt(2.0 / 3.0) / image_spread;

  std::vector<Vec3> rays(n_pts);
  for (std::size_t n = 0; n < n_pts; ++n) {
    const Vec2& m = problem.observations[n].mean;
    rays[n] = Vec3((m(0) - cam.cx) / cam.fx, (m(1) - cam.cy) / cam.fy, 1.0);
  }

  std::vector<Vec3> centered_model(n_pts);
  for (std::size_t n = 0; n < n_pts; ++n)
    centered_model[n] = problem.model.points[n] - model_centroid;

  auto fit = [&](const std::vector<Vec3>& targets, Mat3& rot, Vec3& trans) {
    Vec3 target_centroid = Vec3::Zero();
    for (const auto& q : targets) target_centroid += q;
    target_centroid /= static_cast<double>(n_pts);
    std::vector<Vec3> centered(n_pts);
    for (std::size_t n = 0; n < n_pts; ++n) centered[n] = targets[n] - target_centroid;
    rot = procrustes(centered_model, centered);
    trans = target_centroid - rot * model_centroid;
  };

  // constant-depth back-projection, then object-space collinearity refinement
  std::vector<Vec3> targets(n_pts);
  for (std::size_t n = 0; n < n_pts; ++n) targets[n] = depth * rays[n];
  Mat3 rot;
  Vec3 trans;
  fit(targets, rot, trans);
  for (int pass = 0; pass < 30; ++pass) {
    for (std::size_t n = 0; n < n_pts; ++n) {
      const Vec3 p = rot * problem.model.points[n] + trans;
      targets[n] = rays[n] * (rays[n].dot(p) / rays[n].squaredNorm());
    }
    fit(targets, rot, trans);
  }

  double min_depth = std::numeric_limits<double>::infinity();
  for (const auto& p : problem.model.points) min_depth = std::min(min_depth, (rot * p + trans)(2));
  if (!(min_depth > 1e-3 * depth)) trans(2) += 1e-3 * depth - min_depth;

  Pose6D pose;
  pose.euler = matrix_to_euler(rot).euler;
  pose.translation = trans;
  return pose;
}

}  // namespace confpose
