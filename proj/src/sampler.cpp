#include "confpose/sampler.hpp"

#include <random>

#include "confpose/error.hpp"
#include "confpose/hull.hpp"
#include "confpose/metrics.hpp"
#include "confpose/synth.hpp"

namespace confpose {

namespace {

bool reprojects_inside(const PnPProblem& problem, const KeypointConfidenceRegion& region,
                       const Pose6D& pose) {
  for (std::size_t n = 0; n < problem.size(); ++n) {
    const Vec3 pc = euler_to_matrix(pose.euler) * problem.model.points[n] + pose.translation;
    if (!(pc(2) > kMinDepth)) return false;
    if ((project(problem.model.points[n], pose, problem.cam) - region.centers[n]).norm() > region.radii[n])
      return false;
  }
  return true;
}

// Volume 0 with no hull for a flat set; nothing at all below 4 points.
void build_hull(const std::vector<Vec3>& points, std::optional<ConvexHull3>& hull,
                std::optional<double>& volume) {
  if (points.size() < 4) return;
  try {
    hull = convex_hull_3d(points);
    volume = hull->volume();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateHull) throw;
    volume = 0.0;
  }
}

}  // namespace

Vec3 unwrapped_degrees(const Vec3& euler, const Vec3& center) {
  return kRadToDeg * (center + wrapped_angle_difference(euler, center));
}

bool SampledPoseRegion::rotation_contains(const Vec3& euler) const {
  return hull_R && hull_R->contains(unwrapped_degrees(euler, center.euler));
}

bool SampledPoseRegion::translation_contains(const Vec3& t) const {
  return hull_t && hull_t->contains(t);
}

SampledPoseRegion sample_region(const PnPProblem& problem, const KeypointConfidenceRegion& region2d,
                                const SamplerConfig& cfg) {
  PnPProblem central = problem;
  for (std::size_t n = 0; n < central.size() && n < region2d.size(); ++n)
    central.observations[n].mean = region2d.centers[n];
  const PnPSolution sol = solve(central, initial_pose(central), cfg.solver);
  return sample_region(problem, region2d, sol.pose, cfg);
}

SampledPoseRegion sample_region(const PnPProblem& problem, const KeypointConfidenceRegion& region2d,
                                const Pose6D& center, const SamplerConfig& cfg) {
  problem.validate();
  cfg.solver.validate();
  if (cfg.trials < 1) fail(ErrorCode::InvalidArgument, "sampler needs at least one trial");
  if (region2d.size() != problem.size() || region2d.radii.size() != problem.size())
    fail(ErrorCode::LengthMismatch, "keypoint region size differs from the problem");
  for (double r : region2d.radii)
    if (!std::isfinite(r) || r < 0.0) fail(ErrorCode::InvalidArgument, "region radii must be finite");

  SampledPoseRegion out;
  out.center = center;
  PnPProblem drawn = problem;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, t));
    for (std::size_t n = 0; n < problem.size(); ++n)
      drawn.observations[n].mean = sample_disk(region2d.centers[n], region2d.radii[n], rng);
    ++out.attempted;
    PnPSolution sol;
    try {
      sol = solve(drawn, center, cfg.solver);
    } catch (const Error&) {
      continue;
    }
    if (!sol.converged || !reprojects_inside(problem, region2d, sol.pose)) continue;
    out.pose_samples.push_back(sol.pose);
  }
  out.accepted = out.pose_samples.size();

  std::vector<Vec3> rot, trans;
  for (const auto& p : out.pose_samples) {
    rot.push_back(unwrapped_degrees(p.euler, center.euler));
    trans.push_back(p.translation);
  }
  build_hull(rot, out.hull_R, out.hull_R_volume);
  build_hull(trans, out.hull_t, out.hull_t_volume);
  return out;
}

}  // namespace confpose
