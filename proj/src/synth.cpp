#include "confpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "confpose/error.hpp"

namespace confpose {

namespace {

constexpr std::uint64_t kModelStream = 0xC0FFEEULL;

bool inside_frame(const Vec2& p, const SceneConfig& cfg) {
  return p(0) >= 0.0 && p(0) < cfg.image_width && p(1) >= 0.0 && p(1) < cfg.image_height;
}

}  // namespace

void SceneConfig::validate() const {
  if (n_keypoints < 4) fail(ErrorCode::InvalidArgument, "n_keypoints must be at least 4");
  if (!(model_extent > 0.0)) fail(ErrorCode::InvalidArgument, "model_extent must be positive");
  if (!(depth_min > 0.0 && depth_min <= depth_max))
    fail(ErrorCode::InvalidArgument, "depth range must be positive and ordered");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg < 90.0))
    fail(ErrorCode::InvalidArgument, "max_rotation must lie in [0, 90) degrees");
  if (!(noise_std_min >= 0.0 && noise_std_min <= noise_std_max))
    fail(ErrorCode::InvalidArgument, "noise std range must be non-negative and ordered");
  if (!(cov_misspecification > 0.0))
    fail(ErrorCode::InvalidArgument, "cov_misspecification must be positive");
  if (!(focal > 0.0) || image_width < 1 || image_height < 1)
    fail(ErrorCode::InvalidArgument, "camera configuration must be positive");
}

CameraIntrinsics SceneConfig::camera() const {
  return {focal, focal, 0.5 * image_width, 0.5 * image_height};
}

double SceneConfig::image_diagonal() const {
  return std::hypot(static_cast<double>(image_width), static_cast<double>(image_height));
}

PnPProblem SyntheticDataset::problem(std::size_t i) const {
  return {model, samples.at(i).predicted, cam};
}

std::vector<CalibrationSample> SyntheticDataset::calibration_samples() const {
  std::vector<CalibrationSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.gt_keypoints2d, s.predicted});
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ObjectModel generate_model(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.model_seed, kModelStream));
  std::uniform_real_distribution<double> coord(-0.5 * cfg.model_extent, 0.5 * cfg.model_extent);
  for (int attempt = 0; attempt < kMaxPoseRejections; ++attempt) {
    ObjectModel model;
    model.points.resize(static_cast<std::size_t>(cfg.n_keypoints));
    for (auto& p : model.points) p = Vec3(coord(rng), coord(rng), coord(rng));
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : model.points) centroid += p;
    centroid /= static_cast<double>(model.size());
    for (auto& p : model.points) p -= centroid;
    try {
      model.validate();
      return model;
    } catch (const Error&) {
    }
  }
  fail(ErrorCode::GenerationExhausted, "could not draw a non-coplanar object model");
}

SyntheticSample generate_sample(const SceneConfig& cfg, const ObjectModel& model,
                                std::uint64_t sample_seed) {
  std::mt19937_64 rng(sample_seed);
  const double max_rot = cfg.max_rotation_deg * kPi / 180.0;
  std::uniform_real_distribution<double> angle(-max_rot, max_rot);
  std::uniform_real_distribution<double> depth(cfg.depth_min, cfg.depth_max);
  std::uniform_real_distribution<double> lateral(-0.35, 0.35);
  const CameraIntrinsics cam = cfg.camera();

  SyntheticSample s;
  bool found = false;
  for (int attempt = 0; attempt < kMaxPoseRejections && !found; ++attempt) {
    Pose6D pose;
    pose.euler = Vec3(angle(rng), angle(rng), angle(rng));
    const double z = depth(rng);
    pose.translation = Vec3(lateral(rng) * z * cam.cx / cam.fx,
                            lateral(rng) * z * cam.cy / cam.fy, z);
    Keypoints2d kps;
    kps.reserve(model.size());
    bool ok = true;
    for (const auto& p : model.points) {
      const Vec3 pc = euler_to_matrix(pose.euler) * p + pose.translation;
      if (!(pc(2) > kMinDepth)) {
        ok = false;
        break;
      }
      kps.push_back(project(p, pose, cam));
      if (!inside_frame(kps.back(), cfg)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      s.gt_pose = pose;
      s.gt_keypoints2d = std::move(kps);
      found = true;
    }
  }
  if (!found)
    fail(ErrorCode::GenerationExhausted,
         "no pose kept every keypoint in frame after " + std::to_string(kMaxPoseRejections) +
             " draws");

  std::uniform_real_distribution<double> noise_std(cfg.noise_std_min, cfg.noise_std_max);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.predicted.reserve(model.size());
  s.noise_std.reserve(model.size());
  for (const auto& gt : s.gt_keypoints2d) {
    const double sigma = cfg.noise_std_min == cfg.noise_std_max ? cfg.noise_std_min
                                                                : noise_std(rng);
    GaussianKeypoint kp;
    kp.mean = gt;
    if (sigma > 0.0) {
      const double dx = normal(rng), dy = normal(rng);
      kp.mean += sigma * Vec2(dx, dy);
    }
    const double predicted_std = std::max(sigma, kMinPredictedStd);
    kp.cov = predicted_std * predicted_std * cfg.cov_misspecification * Mat2::Identity();
    s.predicted.push_back(kp);
    s.noise_std.push_back(sigma);
  }
  return s;
}

SyntheticDataset generate(const SceneConfig& cfg, std::size_t count) {
  cfg.validate();
  if (count < 1) fail(ErrorCode::InvalidArgument, "count must be at least 1");
  SyntheticDataset ds;
  ds.cam = cfg.camera();
  ds.model = generate_model(cfg);
  ds.image_diagonal = cfg.image_diagonal();
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    ds.samples.push_back(generate_sample(cfg, ds.model, derive_seed(cfg.rng_seed, i)));
  return ds;
}

}  // namespace confpose
