#pragma once
// Dataset (JSON lines) and calibration (JSON) files.
//
// A dataset file starts with a header record holding the camera, image size,
// object model, Euler convention and a content hash of those three; every
// following line is one image. Calibration files carry the hash of the
// dataset they were fitted on so that evaluation can refuse a mismatch.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "confpose/conformal.hpp"
#include "confpose/core.hpp"
#include "confpose/pnp.hpp"
#include "confpose/synth.hpp"

namespace confpose {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCalibrationFormatVersion = 1;
inline constexpr const char* kEulerConventionTag = "ZYX-intrinsic";

struct DatasetRecord {
  Pose6D gt_pose;
  Keypoints2d gt_keypoints;
  GaussianKeypointSet predicted;
};

struct Dataset {
  CameraIntrinsics cam;
  ObjectModel model;
  int image_width = 0;
  int image_height = 0;
  std::optional<SceneConfig> generator;  // present for generated files
  std::vector<DatasetRecord> records;

  std::size_t size() const { return records.size(); }
  double image_diagonal() const;
  PnPProblem problem(std::size_t i) const;
  std::vector<CalibrationSample> calibration_samples() const;
  /// SHA-256 (hex) over the camera, image size and object model.
  std::string content_hash() const;

  static Dataset from_synthetic(const SyntheticDataset& ds, const SceneConfig& cfg);
};

void write_dataset(std::ostream& out, const Dataset& ds);
/// Throws MalformedInput naming the first offending line (1-based).
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

struct CalibrationFile {
  CalibrationModel model;
  double epsilon = 0.1;
  double quantile = 0.0;
  std::string content_hash;
};

/// Calibrates on every record and resolves the quantile at epsilon
/// (EpsilonTooSmall when floor(l * eps) = 0).
CalibrationFile calibrate_dataset(const Dataset& ds, double epsilon, double scale_exponent);

void write_calibration(std::ostream& out, const CalibrationFile& cal);
CalibrationFile read_calibration(std::istream& in);
void save_calibration(const std::string& path, const CalibrationFile& cal);
CalibrationFile load_calibration(const std::string& path);

/// Writes `text` to `path`, replacing the file; Io error on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace confpose
