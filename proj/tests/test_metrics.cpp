#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "confpose/error.hpp"
#include "confpose/metrics.hpp"

namespace confpose {
namespace {

Ellipsoid3 ball(const Vec3& center, double radius) {
  Ellipsoid3 e;
  e.center = center;
  e.shape = radius * radius * Mat3::Identity();
  return e;
}

PoseConfidenceRegion pose_region(const Pose6D& center, double rot_radius, double trans_radius) {
  PoseConfidenceRegion r;
  r.rotation = ball(center.euler, rot_radius);
  r.translation = ball(center.translation, trans_radius);
  return r;
}

KeypointConfidenceRegion kp_region(const Keypoints2d& centers, double radius) {
  KeypointConfidenceRegion r;
  r.centers = centers;
  r.radii.assign(centers.size(), radius);
  r.capped.assign(centers.size(), false);
  return r;
}

TEST(EllipsoidVolume, Examples) {
  Ellipsoid3 e;
  EXPECT_NEAR(ellipsoid_volume(e), 4.0 * kPi / 3.0, 1e-12);
  e.shape = Vec3(4, 1, 1).asDiagonal();
  EXPECT_NEAR(ellipsoid_volume(e), 8.0 * kPi / 3.0, 1e-12);
  e.shape = Mat3::Identity();
  e.scale = 4.0;
  EXPECT_NEAR(ellipsoid_volume(e), 32.0 * kPi / 3.0, 1e-12);
}

TEST(EllipsoidVolume, ScaleAndUnits) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = n(rng);
    Ellipsoid3 e;
    e.shape = a * a.transpose() + 0.01 * Mat3::Identity();
    const double v = ellipsoid_volume(e);
    for (double c : {1.5, 2.0, 10.0}) {
      Ellipsoid3 s = e;
      s.scale = c;
      EXPECT_NEAR(ellipsoid_volume(s) / v, std::pow(c, 1.5), 1e-9 * std::pow(c, 1.5));
    }
    // converting the covariance itself to degrees gives the same deg^3 volume
    Ellipsoid3 deg = e;
    deg.shape *= kRadToDeg * kRadToDeg;
    EXPECT_NEAR(rotation_volume_deg3(e) / ellipsoid_volume(deg), 1.0, 1e-12);
    EXPECT_NEAR(rotation_volume_deg3(e) / v, std::pow(180.0 / kPi, 3), 1e-9);
  }
}

TEST(EllipsoidVolume, DegenerateShape) {
  Ellipsoid3 e;
  e.shape = Vec3(1, 1, 0).asDiagonal();
  try {
    ellipsoid_volume(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::DegenerateShape);
  }
}

TEST(KeypointCoverage, Examples) {
  const Keypoints2d pts{Vec2(0, 0), Vec2(10, 10)};
  std::vector<KeypointConfidenceRegion> regions(10, kp_region(pts, 1.0));
  std::vector<Keypoints2d> gts(10, pts);
  EXPECT_EQ(keypoint_coverage(regions, gts), 1.0);
  gts[3][1] += Vec2(2, 0);
  EXPECT_DOUBLE_EQ(keypoint_coverage(regions, gts), 0.9);
  EXPECT_THROW(keypoint_coverage({}, {}), Error);
  gts.pop_back();
  try {
    keypoint_coverage(regions, gts);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::LengthMismatch);
  }
}

TEST(PoseCoverage, CentersUnderThreshold) {
  const Pose6D p{Vec3(0.1, 0.2, 0.3), Vec3(0, 0, 3)};
  const std::vector<PoseConfidenceRegion> regions(4, pose_region(p, 0.05, 0.01));
  const auto cov = pose_coverage(regions, std::vector<Pose6D>(4, p), Thresholds{});
  EXPECT_EQ(cov.eta_R, 1.0);
  EXPECT_EQ(cov.eta_t, 1.0);
  EXPECT_EQ(cov.out_R, 0u);
  EXPECT_EQ(cov.out_t, 0u);
}

TEST(PoseCoverage, OverThresholdCountsAsFailure) {
  const Pose6D p{Vec3(0.1, 0.2, 0.3), Vec3(0, 0, 3)};
  std::vector<PoseConfidenceRegion> regions(4, pose_region(p, 0.05, 0.01));
  regions[2].rotation = ball(p.euler, 2.0);  // ~2.7e6 deg^3 > 90^3
  const auto cov = pose_coverage(regions, std::vector<Pose6D>(4, p), Thresholds{});
  EXPECT_EQ(cov.eta_R, 0.75);
  EXPECT_EQ(cov.out_R, 1u);
  EXPECT_EQ(cov.eta_t, 1.0);
}

TEST(PoseCoverage, ClosedBoundaryAndWrapping) {
  Pose6D center{Vec3(kPi - 0.01, 0, 0), Vec3(0, 0, 3)};
  PoseConfidenceRegion r = pose_region(center, 0.02, 0.5);
  // across the +-pi seam: 0.015 rad away after wrapping
  Pose6D gt{Vec3(-kPi + 0.005, 0, 0), Vec3(0.5, 0, 3)};
  const auto cov = pose_coverage({r}, {gt}, Thresholds{});
  EXPECT_EQ(cov.eta_R, 1.0);
  EXPECT_EQ(cov.eta_t, 1.0);  // translation exactly on the boundary
  EXPECT_EQ(wrapped_angle_difference(Vec3(kPi, 0, 0), Vec3(0, 0, 0))(0), kPi);
  EXPECT_EQ(wrapped_angle_difference(Vec3(-kPi, 0, 0), Vec3(0, 0, 0))(0), kPi);
}

TEST(PoseCoverage, MonotoneInThreshold) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.001, 0.6);
  std::vector<PoseConfidenceRegion> regions;
  std::vector<Pose6D> gts;
  for (int i = 0; i < 200; ++i) {
    const Pose6D c{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), 3)};
    regions.push_back(pose_region(c, u(rng), u(rng)));
    gts.push_back({c.euler + Vec3::Constant(0.5 * u(rng)), c.translation + Vec3::Constant(0.5 * u(rng))});
  }
  double last_R = -1, last_t = -1;
  for (double tau : {1.0, 10.0, 1e3, 1e5, 1e7}) {
    const auto cov = pose_coverage(regions, gts, Thresholds{tau, tau * 1e-6});
    EXPECT_GE(cov.eta_R, last_R);
    EXPECT_GE(cov.eta_t, last_t);
    last_R = cov.eta_R;
    last_t = cov.eta_t;
  }
}

TEST(Summarize, FilteredMean) {
  std::vector<ImageResult> imgs(3);
  imgs[0].V_R = 1;
  imgs[1].V_R = 2;
  imgs[2].V_R = Thresholds{}.tau_R + 1;
  for (auto& i : imgs) i.V_t = 0.5;
  const auto rep = summarize(imgs, Thresholds{});
  ASSERT_TRUE(rep.mean_V_R);
  EXPECT_EQ(*rep.mean_V_R, 1.5);
  EXPECT_EQ(rep.out_R, 1u);
  EXPECT_EQ(*rep.mean_V_t, 0.5);
  EXPECT_EQ(rep.volume_samples.size(), 3u);
}

TEST(Summarize, AllOverThresholdIsUndefined) {
  std::vector<ImageResult> imgs(2);
  for (auto& i : imgs) {
    i.V_R = 1e9;
    i.V_t = 0.1;
    i.rotation_inside = true;
  }
  const auto rep = summarize(imgs, Thresholds{});
  EXPECT_FALSE(rep.mean_V_R.has_value());
  EXPECT_EQ(rep.out_R, 2u);
  EXPECT_EQ(rep.eta_R, 0.0);
}

TEST(Summarize, SingleImageAndFailures) {
  ImageResult one;
  one.V_R = 7;
  one.V_t = 0.25;
  one.keypoints_covered = one.rotation_inside = one.translation_inside = true;
  one.radii = {1.0, 3.0};
  auto rep = summarize({one}, Thresholds{});
  EXPECT_EQ(*rep.mean_V_R, 7.0);
  EXPECT_EQ(*rep.mean_V_t, 0.25);
  EXPECT_EQ(rep.eta_R, 1.0);
  EXPECT_EQ(rep.radii_stats, (std::vector<double>{1.0, 3.0}));

  ImageResult failed;
  failed.failed = true;
  failed.keypoints_covered = true;
  failed.radii = {3.0, 5.0};
  rep = summarize({one, failed}, Thresholds{});
  EXPECT_EQ(rep.failed, 1u);
  EXPECT_EQ(rep.eta_kpt, 1.0);
  EXPECT_EQ(rep.eta_R, 0.5);
  EXPECT_EQ(rep.volume_samples.size(), 1u);
  EXPECT_EQ(rep.radii_stats, (std::vector<double>{2.0, 4.0}));
}

TEST(Summarize, MatchesBruteForceAndIsPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const Thresholds th{100.0, 0.5};
  std::vector<ImageResult> imgs(300);
  for (auto& i : imgs) {
    i.V_R = 200 * u(rng);
    i.V_t = u(rng);
    i.keypoints_covered = u(rng) < 0.9;
    i.rotation_inside = u(rng) < 0.8;
    i.translation_inside = u(rng) < 0.7;
    i.failed = u(rng) < 0.05;
  }
  const auto rep = summarize(imgs, th);
  std::size_t r = 0, t = 0, k = 0;
  for (const auto& i : imgs) {
    k += i.keypoints_covered;
    r += !i.failed && i.rotation_inside && i.V_R <= th.tau_R;
    t += !i.failed && i.translation_inside && i.V_t <= th.tau_t;
  }
  EXPECT_EQ(rep.eta_kpt, k / 300.0);
  EXPECT_EQ(rep.eta_R, r / 300.0);
  EXPECT_EQ(rep.eta_t, t / 300.0);
  std::shuffle(imgs.begin(), imgs.end(), rng);
  const auto again = summarize(imgs, th);
  EXPECT_EQ(again.eta_R, rep.eta_R);
  EXPECT_EQ(again.out_t, rep.out_t);
  EXPECT_NEAR(*again.mean_V_R, *rep.mean_V_R, 1e-12);
}

TEST(Distribution, BoxplotQuartilesAndWhiskers) {
  const auto b = boxplot({1, 2, 3, 4, 5, 6, 7, 8, 100});
  EXPECT_EQ(b.q1, 3.0);
  EXPECT_EQ(b.median, 5.0);
  EXPECT_EQ(b.q3, 7.0);
  EXPECT_EQ(b.whisker_low, 1.0);
  EXPECT_EQ(b.whisker_high, 8.0);
  ASSERT_EQ(b.outliers.size(), 1u);
  EXPECT_EQ(b.outliers[0], 100.0);
}

TEST(Distribution, CdfExport) {
  std::ostringstream os;
  write_cdf(os, {3.0, 1.0, 2.0, 0.5}, "V_t m^3 mode=deterministic scale=chi2");
  EXPECT_EQ(os.str(), "# V_t m^3 mode=deterministic scale=chi2\n0.5 0.25\n1 0.5\n2 0.75\n3 1\n");
}

}  // namespace
}  // namespace confpose
