#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "confpose/error.hpp"
#include "confpose/ift.hpp"
#include "confpose/stats.hpp"
#include "scene_fixtures.hpp"

namespace confpose {
namespace {

using testing::make_scene;
using testing::perturb;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

template <typename A, typename B>
double max_relative_error(const A& got, const B& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1e-300, want.cwiseAbs().maxCoeff());
}

// Independent oracle: regularized lower incomplete gamma by its power series.
double chi_square_cdf_series(int dof, double x) {
  const double s = 0.5 * dof, z = 0.5 * x;
  double term = 1.0 / std::tgamma(s + 1.0), sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= z / (s + n);
    sum += term;
  }
  return std::exp(-z) * std::pow(z, s) * sum;
}

double chi_square_quantile_series(int dof, double p) {
  double lo = 0.0, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi_square_cdf_series(dof, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// noisy scene with the pose at the least-squares optimum
struct Stationary {
  PnPProblem problem;
  Pose6D gt;
  Pose6D optimum;
};

Stationary stationary_scene(std::uint64_t seed, double noise_px = 1.0, int n_points = 11) {
  auto sc = make_scene(seed, n_points, 60.0, noise_px);
  const auto sol = solve(sc.problem, sc.gt, least_squares_config());
  EXPECT_TRUE(sol.converged);
  return {sc.problem, sc.gt, sol.pose};
}

TEST(ChiSquare, MatchesSeriesOracle) {
  for (int dof : {1, 2, 3})
    for (double x : {0.01, 0.5, 2.0, 6.25, 15.0})
      EXPECT_NEAR(chi_square_cdf(dof, x), chi_square_cdf_series(dof, x), 1e-12) << dof << " " << x;
  const double q3 = chi_square_quantile_series(3, 0.9);
  EXPECT_NEAR(q3, 6.2514, 5e-5);
  EXPECT_NEAR(chi_square_quantile(3, 0.9), q3, 1e-9);
  EXPECT_NEAR(chi_square_quantile(2, 0.9), chi_square_quantile_series(2, 0.9), 1e-9);
  EXPECT_NEAR(chi_square_quantile(3, 0.6), chi_square_quantile_series(3, 0.6), 1e-9);
}

TEST(Constraint, VanishesAtNoiseFreeOptimum) {
  const auto sc = make_scene(5);
  EXPECT_LT(constraint(sc.problem, sc.gt).norm(), 1e-10);
}

TEST(Constraint, MatchesFiniteDifferencesOfObjective) {
  const auto st = stationary_scene(6);
  const Pose6D at = perturb(st.optimum, 0.01, 0.02, 6);
  const Vec6 f = constraint(st.problem, at);
  Vec6 fd;
  for (int j = 0; j < 6; ++j) {
    const double h = 1e-6;
    Vec6 yp = at.vector(), ym = at.vector();
    yp(j) += h;
    ym(j) -= h;
    fd(j) = (reprojection_objective(st.problem, Pose6D::from_vector(yp)) -
             reprojection_objective(st.problem, Pose6D::from_vector(ym))) / (2 * h);
  }
  EXPECT_LT(max_relative_error(f, fd), 1e-6);
}

TEST(Constraint, ZeroResidualGivesZero) {
  PnPProblem p;
  p.cam = {500, 500, 320, 240};
  p.model.points = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0), Vec3(0, 0, 0.1)};
  const Pose6D pose{Vec3(0.1, 0.2, 0.3), Vec3(0.05, 0, 2)};
  for (const auto& z : p.model.points) p.observations.push_back({project(z, pose, p.cam), Mat2::Identity()});
  EXPECT_LT(constraint(p, pose).norm(), 1e-9);
}

TEST(Dfdy, EqualsGaussNewtonAtZeroResidual) {
  const auto sc = make_scene(7);
  const auto parts = dfdy_parts(sc.problem, sc.gt);
  EXPECT_LT(max_relative_error(dfdy(sc.problem, sc.gt), parts.gauss_newton), 1e-8);
}

TEST(Dfdy, MatchesFiniteDifferencesOfConstraint) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto st = stationary_scene(20 + seed, 2.0);
    const Pose6D at = perturb(st.optimum, 0.05, 0.05, seed);
    const Mat6 a = dfdy(st.problem, at);
    Mat6 fd;
    for (int j = 0; j < 6; ++j) {
      const double h = 1e-5 * (1.0 + std::abs(at.vector()(j)));
      Vec6 yp = at.vector(), ym = at.vector();
      yp(j) += h;
      ym(j) -= h;
      fd.col(j) = (constraint(st.problem, Pose6D::from_vector(yp)) -
                   constraint(st.problem, Pose6D::from_vector(ym))) / (2 * h);
    }
    EXPECT_LT(max_relative_error(a, fd), 1e-5) << seed;
    EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-8 * a.cwiseAbs().maxCoeff());
  }
}

TEST(Dfdy, CurvatureLinearInResiduals) {
  const auto sc = make_scene(8, 11);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.5);
  PnPProblem once = sc.problem, twice = sc.problem;
  for (std::size_t i = 0; i < sc.problem.size(); ++i) {
    const Vec2 d(n(rng), n(rng));
    once.observations[i].mean += d;
    twice.observations[i].mean += 2.0 * d;
  }
  const auto a = dfdy_parts(once, sc.gt);
  const auto b = dfdy_parts(twice, sc.gt);
  EXPECT_LT(max_relative_error(b.gauss_newton, a.gauss_newton), 1e-14);
  EXPECT_LT(max_relative_error(b.curvature, 2.0 * a.curvature), 1e-6);
  EXPECT_GT(a.curvature.norm(), 0.0);
}

TEST(Dfdx, SparsityAndFiniteDifferences) {
  const auto st = stationary_scene(9);
  const PoseJacobian b = dfdx(st.problem, st.optimum);
  ASSERT_EQ(b.cols(), 2 * static_cast<Eigen::Index>(st.problem.size()));
  EXPECT_GT(b.norm(), 0.0);
  for (std::size_t n = 0; n < st.problem.size(); ++n) {
    for (int c = 0; c < 2; ++c) {
      const double h = 1e-4;
      PnPProblem plus = st.problem, minus = st.problem;
      plus.observations[n].mean(c) += h;
      minus.observations[n].mean(c) -= h;
      const Vec6 fd = (constraint(plus, st.optimum) - constraint(minus, st.optimum)) / (2 * h);
      const Vec6 col = b.col(2 * static_cast<Eigen::Index>(n) + c);
      EXPECT_LT(max_relative_error(col, fd), 1e-6);
    }
    // touching observation n leaves every other column unchanged
    PnPProblem moved = st.problem;
    moved.observations[n].mean += Vec2(3, -2);
    const PoseJacobian b2 = dfdx(moved, st.optimum);
    EXPECT_EQ((b2 - b).norm(), 0.0);
  }
}

TEST(PoseJacobian, MatchesDirectionalResolve) {
  const auto st = stationary_scene(10);
  const PoseJacobian jac = pose_jacobian(st.problem, st.optimum);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto cols = jac.cols();
  for (int dir = 0; dir < 20; ++dir) {
    Eigen::VectorXd delta(cols);
    for (Eigen::Index k = 0; k < cols; ++k) delta(k) = n(rng);
    delta.normalize();
    const double h = 1e-4;
    PnPProblem plus = st.problem, minus = st.problem;
    for (std::size_t i = 0; i < st.problem.size(); ++i) {
      const Vec2 d = h * delta.segment<2>(2 * static_cast<Eigen::Index>(i));
      plus.observations[i].mean += d;
      minus.observations[i].mean -= d;
    }
    const Vec6 yp = solve(plus, st.optimum, least_squares_config()).pose.vector();
    const Vec6 ym = solve(minus, st.optimum, least_squares_config()).pose.vector();
    const Vec6 resolve = (yp - ym) / (2 * h);
    const Vec6 predicted = jac * delta;
    EXPECT_LT((resolve - predicted).norm() / predicted.norm(), 0.01) << dir;
  }
}

TEST(PoseJacobian, ConstantScalingOfConstraintCancels) {
  const auto st = stationary_scene(11);
  const Mat6 a = dfdy(st.problem, st.optimum);
  const PoseJacobian b = dfdx(st.problem, st.optimum);
  const PoseJacobian j1 = -a.inverse() * b;
  const PoseJacobian j2 = -(2.0 * a).inverse() * (2.0 * b);  // -4 instead of -2 prefactor
  EXPECT_LT(max_relative_error(j2, j1), 1e-12);
  EXPECT_LT(max_relative_error(pose_jacobian(st.problem, st.optimum), j1), 1e-9);
}

TEST(PoseJacobian, DuplicatedCorrespondencesSplitTheEffect) {
  const auto st = stationary_scene(12, 1.0, 8);
  PnPProblem doubled = st.problem;
  for (std::size_t i = 0; i < st.problem.size(); ++i) {
    doubled.model.points.push_back(st.problem.model.points[i]);
    doubled.observations.push_back(st.problem.observations[i]);
  }
  const PoseJacobian j = pose_jacobian(st.problem, st.optimum);
  const PoseJacobian jd = pose_jacobian(doubled, st.optimum);
  const auto half = j.cols();
  EXPECT_LT(max_relative_error(jd.leftCols(half), 0.5 * j), 1e-9);
  EXPECT_LT(max_relative_error(jd.leftCols(half) + jd.rightCols(half), j), 1e-9);
}

TEST(PoseJacobian, RefusesUnconvergedPose) {
  const auto st = stationary_scene(13);
  const Pose6D off = perturb(st.optimum, 0.05, 0.05, 13);
  EXPECT_EQ(code_of([&] { pose_jacobian(st.problem, off); }), ErrorCode::NotStationary);
}

TEST(PoseJacobian, IllConditionedNearCollinearModel) {
  PnPProblem p;
  p.cam = {800, 800, 512, 512};
  for (int i = 0; i < 6; ++i) {
    const double t = -0.25 + 0.1 * i;
    p.model.points.push_back(Vec3(t, 1e-6 * ((i % 3) - 1), 1e-6 * ((i % 2) ? 1 : -1)));
  }
  ASSERT_NO_THROW(p.model.validate());
  const Pose6D pose{Vec3(0.2, 0.1, -0.3), Vec3(0.1, 0.05, 3.0)};
  for (const auto& z : p.model.points) p.observations.push_back({project(z, pose, p.cam), Mat2::Identity()});
  EXPECT_EQ(code_of([&] { pose_jacobian(p, pose); }), ErrorCode::IllConditioned);
}

TEST(Propagate, ZeroJacobian) {
  const KeypointCovariance cov{std::vector<Mat2>(4, Mat2::Identity())};
  EXPECT_EQ(propagate(PoseJacobian::Zero(6, 8), cov).full, Mat6::Zero());
}

TEST(Propagate, SelectionMatrix) {
  const KeypointCovariance cov{std::vector<Mat2>(3, Mat2::Identity())};
  PoseJacobian sel = PoseJacobian::Zero(6, 6);
  sel.leftCols(6) = Mat6::Identity();
  EXPECT_EQ(propagate(sel, cov).full, Mat6::Identity());
  PoseJacobian padded = PoseJacobian::Zero(6, 8);
  padded.leftCols(6) = Mat6::Identity();
  const KeypointCovariance four{std::vector<Mat2>(4, Mat2::Identity())};
  EXPECT_EQ(propagate(padded, four).full, Mat6::Identity());
  EXPECT_EQ(code_of([&] { propagate(padded, cov); }), ErrorCode::DimensionMismatch);
}

TEST(Propagate, MatchesDenseProduct) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_pts = 4 + trial % 7;
    PoseJacobian j(6, 2 * n_pts);
    for (Eigen::Index r = 0; r < j.rows(); ++r)
      for (Eigen::Index c = 0; c < j.cols(); ++c) j(r, c) = n(rng);
    KeypointCovariance cov;
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(2 * n_pts, 2 * n_pts);
    for (int k = 0; k < n_pts; ++k) {
      Mat2 a;
      a << n(rng), n(rng), n(rng), n(rng);
      const Mat2 block = a * a.transpose() + 0.1 * Mat2::Identity();
      cov.blocks.push_back(block);
      dense.block<2, 2>(2 * k, 2 * k) = block;
    }
    const Mat6 oracle = j * dense * j.transpose();
    const PoseCovariance out = propagate(j, cov);
    EXPECT_LT((out.full - oracle).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
    EXPECT_EQ((out.full - out.full.transpose()).norm(), 0.0);
    Eigen::SelfAdjointEigenSolver<Mat6> eig(out.full);
    EXPECT_GE(eig.eigenvalues()(0), 0.0);
  }
}

KeypointConfidenceRegion uniform_region(const PnPProblem& p, double radius) {
  KeypointConfidenceRegion r;
  for (const auto& kp : p.observations) {
    r.centers.push_back(kp.mean);
    r.radii.push_back(radius);
    r.capped.push_back(false);
  }
  return r;
}

double ellipsoid_volume_oracle(const Ellipsoid3& e) {
  return 4.0 / 3.0 * kPi * std::sqrt((e.scale * e.shape).determinant());
}

TEST(RegionFromConformal, VanishingRadii) {
  const auto st = stationary_scene(15);
  const auto sol = solve(st.problem, st.optimum);
  const auto region = region_from_conformal(st.problem, sol, uniform_region(st.problem, 1e-6), 0.1);
  EXPECT_LT(ellipsoid_volume_oracle(region.rotation) * std::pow(180.0 / kPi, 3), 1e-12);
  EXPECT_LT(ellipsoid_volume_oracle(region.translation), 1e-12);
}

TEST(RegionFromConformal, ScaleModes) {
  const auto st = stationary_scene(16);
  const auto sol = solve(st.problem, st.optimum);
  const auto region2d = uniform_region(st.problem, 3.0);
  RegionOptions chi2;
  const auto a = region_from_conformal(st.problem, sol, region2d, 0.1, chi2);
  EXPECT_NEAR(a.rotation.scale, chi_square_quantile_series(3, 0.9), 1e-9);
  EXPECT_NEAR(a.translation.scale, 6.2514, 1e-4);
  EXPECT_NEAR(a.kappa, std::sqrt(chi_square_quantile_series(2, 0.9)), 1e-9);
  RegionOptions paper;
  paper.scale_mode = ScaleMode::Paper;
  const auto b = region_from_conformal(st.problem, sol, region2d, 0.1, paper);
  EXPECT_EQ(b.rotation.scale, 1.0);
  EXPECT_EQ(b.rotation.shape, a.rotation.shape);
  EXPECT_EQ(a.rotation.center, sol.pose.euler);
  EXPECT_EQ(a.translation.center, sol.pose.translation);
}

TEST(RegionFromConformal, DoublingRadiiQuadruplesShapes) {
  const auto st = stationary_scene(17);
  const auto sol = solve(st.problem, st.optimum);
  const auto a = region_from_conformal(st.problem, sol, uniform_region(st.problem, 2.0), 0.1);
  const auto b = region_from_conformal(st.problem, sol, uniform_region(st.problem, 4.0), 0.1);
  EXPECT_LT(max_relative_error(b.rotation.shape, 4.0 * a.rotation.shape), 1e-12);
  EXPECT_LT(max_relative_error(b.translation.shape, 4.0 * a.translation.shape), 1e-12);
  EXPECT_NEAR(ellipsoid_volume_oracle(b.translation) / ellipsoid_volume_oracle(a.translation), 8.0, 1e-9);
}

TEST(RegionFromConformal, LinearizesAtLeastSquaresOptimum) {
  // the default solver is weighted Huber; the Jacobian is taken at the nearby
  // stationary point of the unweighted objective
  const auto sc = make_scene(18, 11, 60.0, 1.0);
  PnPProblem p = sc.problem;
  for (std::size_t n = 0; n < p.size(); ++n) p.observations[n].cov *= 1.0 + 0.5 * n;
  const auto sol = solve(p, sc.gt);
  ASSERT_TRUE(sol.converged);
  const auto region = region_from_conformal(p, sol, uniform_region(p, 3.0), 0.1);
  EXPECT_LT(constraint(p, region.linearization_pose).norm(),
            1e-6 * std::max(1.0, reprojection_objective(p, region.linearization_pose)));
  EXPECT_LT((region.linearization_pose.vector() - sol.pose.vector()).norm(), 0.05);
}

TEST(RegionFromConformal, RotationBlockInvariantUnderModelShift) {
  // shifting the model by d and the translation by -R d reproduces every
  // projection; the Euler block is unchanged and the translation block picks
  // up the rotation coupling t' = t - R(theta) d
  const auto st = stationary_scene(19);
  const Vec3 d(0.3, -0.1, 0.2);
  const Mat3 rot = euler_to_matrix(st.optimum.euler);
  PnPProblem shifted = st.problem;
  for (auto& p : shifted.model.points) p += d;
  Pose6D pose = st.optimum;
  pose.translation -= rot * d;
  for (std::size_t n = 0; n < shifted.size(); ++n)
    ASSERT_LT((project(shifted.model.points[n], pose, shifted.cam) -
               project(st.problem.model.points[n], st.optimum, st.problem.cam)).norm(), 1e-9);

  const KeypointCovariance cov{std::vector<Mat2>(st.problem.size(), Mat2::Identity())};
  const PoseCovariance a = propagate(pose_jacobian(st.problem, st.optimum), cov);
  const PoseCovariance b = propagate(pose_jacobian(shifted, pose), cov);
  EXPECT_LT(max_relative_error(b.rot_block(), a.rot_block()), 1e-6);

  Eigen::Matrix<double, 3, 6> coupling;
  const auto partials = euler_to_matrix_partials(st.optimum.euler);
  for (int k = 0; k < 3; ++k) coupling.col(k) = -(partials[k] * d);
  coupling.rightCols<3>() = Mat3::Identity();
  const Mat3 expected_t = coupling * a.full * coupling.transpose();
  EXPECT_LT(max_relative_error(b.trans_block(), expected_t), 1e-6);
}

TEST(RegionFromConformal, RejectsUnconvergedSolution) {
  const auto st = stationary_scene(20);
  PnPSolution sol;
  sol.pose = st.optimum;
  sol.converged = false;
  EXPECT_EQ(code_of([&] { region_from_conformal(st.problem, sol, uniform_region(st.problem, 1.0), 0.1); }),
            ErrorCode::NotStationary);
}

}  // namespace
}  // namespace confpose
