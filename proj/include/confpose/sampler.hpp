#pragma once
// Sampling baseline for pose regions: draw keypoints uniformly inside the 2D
// balls, solve PnP for each draw, keep poses whose reprojections stay inside
// every ball, and measure the convex hulls of the kept poses.
//
// Each draw is solved with the full-set PnP solver (not a 3-point minimal
// solver), started from the pose estimated on the region centers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "confpose/conformal.hpp"
#include "confpose/core.hpp"
#include "confpose/hull.hpp"
#include "confpose/pnp.hpp"

namespace confpose {

struct SampledPoseRegion {
  std::vector<Pose6D> pose_samples;  // accepted, in trial order
  std::size_t accepted = 0;
  std::size_t attempted = 0;
  // deg^3 (Euler angles unwrapped around the central pose) and m^3; empty
  // when fewer than 4 samples were accepted. A flat set of samples has a
  // hull of volume 0.
  std::optional<double> hull_R_volume;
  std::optional<double> hull_t_volume;
  std::optional<ConvexHull3> hull_R;  // absent when flat or insufficient
  std::optional<ConvexHull3> hull_t;
  Pose6D center;
  bool insufficient() const { return !hull_R_volume || !hull_t_volume; }
  bool rotation_contains(const Vec3& euler) const;
  bool translation_contains(const Vec3& t) const;
};

struct SamplerConfig {
  std::size_t trials = 1000;
  std::uint64_t rng_seed = 0;
  SolverConfig solver;
};

/// Draw uniformly from the closed disk of `radius` around `center`.
template <typename Rng>
Vec2 sample_disk(const Vec2& center, double radius, Rng& rng);

SampledPoseRegion sample_region(const PnPProblem& problem, const KeypointConfidenceRegion& region2d,
                                const SamplerConfig& cfg);
/// Same, with the central pose supplied instead of solved here.
SampledPoseRegion sample_region(const PnPProblem& problem, const KeypointConfidenceRegion& region2d,
                                const Pose6D& center, const SamplerConfig& cfg);

/// Euler triple in degrees, unwrapped to the branch nearest `center` (radians).
Vec3 unwrapped_degrees(const Vec3& euler, const Vec3& center);

}  // namespace confpose

#include <cmath>
#include <random>

namespace confpose {

template <typename Rng>
Vec2 sample_disk(const Vec2& center, double radius, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double theta = 2.0 * kPi * u(rng);
  return center + r * Vec2(std::cos(theta), std::sin(theta));
}

}  // namespace confpose
