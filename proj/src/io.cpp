#include "confpose/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "confpose/error.hpp"

namespace confpose {

namespace {

using json = nlohmann::ordered_json;

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N)
    throw std::invalid_argument(std::string(what) + " must be an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw std::invalid_argument(std::string(what) + " holds a non-number");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
    if (!std::isfinite(v(i))) throw std::invalid_argument(std::string(what) + " holds a non-finite number");
  }
  return v;
}

template <int N>
std::vector<Eigen::Matrix<double, N, 1>> read_vec_list(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  std::vector<Eigen::Matrix<double, N, 1>> out;
  for (const auto& e : j) out.push_back(read_vec<N>(e, what));
  return out;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key);
}

json camera_json(const Dataset& ds) {
  return {{"fx", ds.cam.fx}, {"fy", ds.cam.fy}, {"cx", ds.cam.cx}, {"cy", ds.cam.cy}};
}

json model_json(const ObjectModel& m) {
  json pts = json::array();
  for (const auto& p : m.points) pts.push_back(vec_json(p));
  return pts;
}

json scene_config_json(const SceneConfig& c) {
  return {{"n_keypoints", c.n_keypoints},
          {"model_extent", c.model_extent},
          {"depth_range", {c.depth_min, c.depth_max}},
          {"max_rotation_deg", c.max_rotation_deg},
          {"noise_std_range", {c.noise_std_min, c.noise_std_max}},
          {"cov_misspecification", c.cov_misspecification},
          {"rng_seed", c.rng_seed},
          {"model_seed", c.model_seed},
          {"focal", c.focal}};
}

SceneConfig scene_config_from_json(const json& j, const Dataset& ds) {
  SceneConfig c;
  c.n_keypoints = field(j, "n_keypoints").get<int>();
  c.model_extent = field(j, "model_extent").get<double>();
  const auto depth = read_vec<2>(field(j, "depth_range"), "depth_range");
  c.depth_min = depth(0);
  c.depth_max = depth(1);
  c.max_rotation_deg = field(j, "max_rotation_deg").get<double>();
  const auto noise = read_vec<2>(field(j, "noise_std_range"), "noise_std_range");
  c.noise_std_min = noise(0);
  c.noise_std_max = noise(1);
  c.cov_misspecification = field(j, "cov_misspecification").get<double>();
  c.rng_seed = field(j, "rng_seed").get<std::uint64_t>();
  c.model_seed = field(j, "model_seed").get<std::uint64_t>();
  c.focal = field(j, "focal").get<double>();
  c.image_width = ds.image_width;
  c.image_height = ds.image_height;
  return c;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::Io, "SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  fail(ErrorCode::MalformedInput, "line " + std::to_string(line) + ": " + what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace

double Dataset::image_diagonal() const {
  return std::hypot(static_cast<double>(image_width), static_cast<double>(image_height));
}

PnPProblem Dataset::problem(std::size_t i) const { return {model, records.at(i).predicted, cam}; }

std::vector<CalibrationSample> Dataset::calibration_samples() const {
  std::vector<CalibrationSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.gt_keypoints, r.predicted});
  return out;
}

std::string Dataset::content_hash() const {
  const json j = {{"camera", camera_json(*this)},
                  {"image_size", {image_width, image_height}},
                  {"model", model_json(model)}};
  return sha256_hex(j.dump());
}

Dataset Dataset::from_synthetic(const SyntheticDataset& ds, const SceneConfig& cfg) {
  Dataset out;
  out.cam = ds.cam;
  out.model = ds.model;
  out.image_width = cfg.image_width;
  out.image_height = cfg.image_height;
  out.generator = cfg;
  for (const auto& s : ds.samples) out.records.push_back({s.gt_pose, s.gt_keypoints2d, s.predicted});
  return out;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  json header = {{"format", "confpose-dataset"},
                 {"version", kDatasetFormatVersion},
                 {"euler_convention", kEulerConventionTag},
                 {"units", {{"keypoints", "px"}, {"translation", "m"}, {"euler", "rad"}, {"model", "m"}}},
                 {"camera", camera_json(ds)},
                 {"image_size", {ds.image_width, ds.image_height}},
                 {"model", model_json(ds.model)},
                 {"count", ds.records.size()},
                 {"content_hash", ds.content_hash()}};
  if (ds.generator) header["generator"] = scene_config_json(*ds.generator);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    json gt_kp = json::array(), means = json::array(), covs = json::array();
    for (const auto& p : r.gt_keypoints) gt_kp.push_back(vec_json(p));
    for (const auto& kp : r.predicted) {
      means.push_back(vec_json(kp.mean));
      covs.push_back({kp.cov(0, 0), kp.cov(0, 1), kp.cov(1, 1)});
    }
    const json rec = {{"index", i},
                      {"gt_pose", {{"euler", vec_json(r.gt_pose.euler)}, {"translation", vec_json(r.gt_pose.translation)}}},
                      {"gt_keypoints", gt_kp},
                      {"means", means},
                      {"covariances", covs}};
    out << rec.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::string declared_hash;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(line_no, "invalid JSON");
    }
    try {
      if (!have_header) {
        if (!j.is_object() || j.value("format", "") != "confpose-dataset")
          throw std::invalid_argument("first record must be the dataset header");
        if (field(j, "version").get<int>() != kDatasetFormatVersion)
          throw std::invalid_argument("unsupported dataset version");
        if (field(j, "euler_convention").get<std::string>() != kEulerConventionTag)
          throw std::invalid_argument("unsupported Euler convention");
        const json& cam = field(j, "camera");
        ds.cam = {field(cam, "fx").get<double>(), field(cam, "fy").get<double>(),
                  field(cam, "cx").get<double>(), field(cam, "cy").get<double>()};
        ds.cam.validate();
        const json& size = field(j, "image_size");
        if (!size.is_array() || size.size() != 2) throw std::invalid_argument("image_size must be [w, h]");
        ds.image_width = size[0].get<int>();
        ds.image_height = size[1].get<int>();
        if (ds.image_width < 1 || ds.image_height < 1) throw std::invalid_argument("image_size must be positive");
        ds.model.points = read_vec_list<3>(field(j, "model"), "model point");
        ds.model.validate();
        declared_hash = field(j, "content_hash").get<std::string>();
        if (declared_hash != ds.content_hash())
          throw std::invalid_argument("content_hash does not match the camera and model");
        if (j.contains("generator")) ds.generator = scene_config_from_json(j.at("generator"), ds);
        have_header = true;
        continue;
      }
      DatasetRecord r;
      const json& pose = field(j, "gt_pose");
      r.gt_pose.euler = read_vec<3>(field(pose, "euler"), "gt_pose.euler");
      r.gt_pose.translation = read_vec<3>(field(pose, "translation"), "gt_pose.translation");
      r.gt_keypoints = read_vec_list<2>(field(j, "gt_keypoints"), "gt_keypoints");
      const auto means = read_vec_list<2>(field(j, "means"), "means");
      const auto covs = read_vec_list<3>(field(j, "covariances"), "covariances");
      const std::size_t n = ds.model.size();
      if (r.gt_keypoints.size() != n || means.size() != n || covs.size() != n)
        throw std::invalid_argument("keypoint count differs from the model (" + std::to_string(n) + ")");
      for (std::size_t k = 0; k < n; ++k) {
        GaussianKeypoint kp;
        kp.mean = means[k];
        kp.cov << covs[k](0), covs[k](1), covs[k](1), covs[k](2);
        if (!(covs[k](0) > 0.0) || !(covs[k](0) * covs[k](2) - covs[k](1) * covs[k](1) > 0.0))
          throw std::invalid_argument("covariance " + std::to_string(k) + " is not positive definite");
        r.predicted.push_back(kp);
      }
      ds.records.push_back(std::move(r));
    } catch (const Error& e) {
      malformed(line_no, e.what());
    } catch (const std::exception& e) {
      malformed(line_no, e.what());
    }
  }
  if (!have_header) malformed(line_no + 1, "missing dataset header");
  if (ds.records.empty()) malformed(line_no + 1, "dataset has no records");
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  auto out = open_out(path);
  write_dataset(out, ds);
  finish(out, path);
}

Dataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

CalibrationFile calibrate_dataset(const Dataset& ds, double epsilon, double scale_exponent) {
  CalibrationFile cal;
  cal.model = calibrate(ds.calibration_samples(), scale_exponent);
  cal.epsilon = epsilon;
  cal.quantile = quantile(cal.model, epsilon);
  cal.content_hash = ds.content_hash();
  return cal;
}

void write_calibration(std::ostream& out, const CalibrationFile& cal) {
  const json j = {{"format", "confpose-calibration"},
                  {"version", kCalibrationFormatVersion},
                  {"content_hash", cal.content_hash},
                  {"epsilon", cal.epsilon},
                  {"scale_exponent", cal.model.scale_exponent},
                  {"count", cal.model.size()},
                  {"rank", quantile_rank(cal.model.size(), cal.epsilon)},
                  {"quantile", cal.quantile},
                  {"scores", cal.model.scores}};
  out << j.dump(2) << '\n';
}

CalibrationFile read_calibration(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::MalformedInput, std::string("calibration file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "confpose-calibration")
      throw std::invalid_argument("not a calibration file");
    if (field(j, "version").get<int>() != kCalibrationFormatVersion)
      throw std::invalid_argument("unsupported calibration version");
    CalibrationFile cal;
    cal.content_hash = field(j, "content_hash").get<std::string>();
    cal.epsilon = field(j, "epsilon").get<double>();
    std::vector<double> scores = field(j, "scores").get<std::vector<double>>();
    cal.model = calibration_from_scores(std::move(scores), field(j, "scale_exponent").get<double>());
    cal.quantile = quantile(cal.model, cal.epsilon);
    if (cal.quantile != field(j, "quantile").get<double>())
      throw std::invalid_argument("stored quantile disagrees with the scores");
    return cal;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EpsilonTooSmall) throw;
    fail(ErrorCode::MalformedInput, std::string("calibration file: ") + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::MalformedInput, std::string("calibration file: ") + e.what());
  }
}

void save_calibration(const std::string& path, const CalibrationFile& cal) {
  auto out = open_out(path);
  write_calibration(out, cal);
  finish(out, path);
}

CalibrationFile load_calibration(const std::string& path) {
  auto in = open_in(path);
  return read_calibration(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace confpose
