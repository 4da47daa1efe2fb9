#pragma once

// Single-shot weighted PnP.
//
// Minimizes sum_n rho(e_n) with e_n = r_n^T W_n r_n, r_n = x_n - pi_n(y),
// W_n = cov_n^{-1} (or I) and rho the Huber function applied to e_n itself:
//   rho(e) = e^2 / 2                   for e <= delta
//   rho(e) = delta * (|e| - delta / 2) otherwise
// The solver is a Levenberg-Marquardt damped Gauss-Newton over the six pose
// parameters (yaw, pitch, roll, tx, ty, tz).

#include <cstddef>
#include <vector>

#include "confpose/core.hpp"

namespace confpose {

struct PnPProblem {
  ObjectModel model;
  GaussianKeypointSet observations;
  CameraIntrinsics cam;

  std::size_t size() const { return observations.size(); }
  void validate() const;
};

enum class RobustLoss {
  Huber,    // rho as above
  Squared,  // rho(e) = e, plain (weighted) least squares
};

struct SolverConfig {
  double huber_delta = 1.0;
  int max_iters = 100;
  double grad_tol = 1e-10;
  double initial_damping = 1e-3;
  bool use_weights = true;
  RobustLoss loss = RobustLoss::Huber;

  void validate() const;
};

enum class Termination {
  GradientTolerance,  // zero gradient, or |grad| <= grad_tol * max(1, cost) at the
                      // iteration cap or after a stall
  StepTolerance,      // undamped Gauss-Newton step below 1e-10 relative
  MaxIterations,
  NoProgress,         // damping saturated without an acceptable step
};

const char* termination_name(Termination t) noexcept;

struct PnPSolution {
  Pose6D pose;
  double final_cost = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;  // GradientTolerance or StepTolerance
  Termination termination = Termination::MaxIterations;
  std::vector<double> cost_trace;  // initial cost then every accepted step
};

double huber(double e, double delta);

/// observations.mean_n - project(model.points3d_n, pose, cam)
Vec2 residual(const PnPProblem& problem, const Pose6D& pose, std::size_t n);

double weighted_cost(const PnPProblem& problem, const Pose6D& pose, const SolverConfig& cfg);

/// Gradient of weighted_cost with respect to the pose vector.
Vec6 cost_gradient(const PnPProblem& problem, const Pose6D& pose, const SolverConfig& cfg);

PnPSolution solve(const PnPProblem& problem, const Pose6D& init, const SolverConfig& cfg = {});

/// Deterministic coarse pose: depth from model/image spread, lateral offset
/// from the observation centroid, rotation from Procrustes fits on
/// back-projected directions.
Pose6D initial_pose(const PnPProblem& problem);

/// Configuration minimizing the plain sum of squared reprojection errors.
SolverConfig least_squares_config();

}  // namespace confpose
