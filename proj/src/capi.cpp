#include "confpose/confpose.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "confpose/error.hpp"
#include "confpose/hull.hpp"
#include "confpose/io.hpp"
#include "confpose/metrics.hpp"
#include "confpose/pipeline.hpp"
#include "confpose/stats.hpp"
#include "confpose/synth.hpp"

struct cp_dataset {
  confpose::Dataset ds;
};
struct cp_calibration {
  confpose::CalibrationFile cal;
};
struct cp_report {
  confpose::EvaluationRun run;
};

namespace {

thread_local std::string g_last_error;

cp_status to_status(confpose::ErrorCode code) {
  // the C enum lists the codes in declaration order, starting at 1
  return static_cast<cp_status>(static_cast<int>(code) + 1);
}

template <typename Fn>
cp_status guarded(Fn&& fn) {
  try {
    fn();
    return CP_OK;
  } catch (const confpose::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return CP_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) confpose::fail(confpose::ErrorCode::InvalidArgument, what);
}

confpose::SceneConfig to_scene(const cp_scene_config& c) {
  confpose::SceneConfig s;
  s.n_keypoints = c.n_keypoints;
  s.model_extent = c.model_extent;
  s.depth_min = c.depth_min;
  s.depth_max = c.depth_max;
  s.max_rotation_deg = c.max_rotation_deg;
  s.noise_std_min = c.noise_std_min;
  s.noise_std_max = c.noise_std_max;
  s.cov_misspecification = c.cov_misspecification;
  s.rng_seed = c.rng_seed;
  s.model_seed = c.model_seed;
  return s;
}

}  // namespace

extern "C" {

const char* cp_last_error(void) { return g_last_error.c_str(); }

const char* cp_status_name(cp_status status) {
  if (status == CP_OK) return "Ok";
  if (status == CP_ERR_INTERNAL) return "Internal";
  const int idx = static_cast<int>(status) - 1;
  if (idx < 0 || idx > static_cast<int>(confpose::ErrorCode::Io)) return "Unknown";
  return confpose::error_code_name(static_cast<confpose::ErrorCode>(idx));
}

const char* cp_version(void) { return "1.0.0"; }

void cp_scene_config_default(cp_scene_config* cfg) {
  if (!cfg) return;
  const confpose::SceneConfig d;
  *cfg = {d.n_keypoints,    d.model_extent,   d.depth_min,           d.depth_max,
          d.max_rotation_deg, d.noise_std_min, d.noise_std_max,     d.cov_misspecification,
          d.rng_seed,       d.model_seed};
}

void cp_evaluate_options_default(cp_evaluate_options* opt) {
  if (!opt) return;
  const confpose::EvaluateOptions d;
  opt->mode = CP_MODE_DETERMINISTIC;
  opt->scale = CP_SCALE_CHI2;
  opt->tau_R_deg3 = d.thresholds.tau_R;
  opt->tau_t_m3 = d.thresholds.tau_t;
  opt->sampler_trials = d.sampler_trials;
  opt->sampler_seed = d.sampler_seed;
  opt->jobs = d.jobs;
}

cp_status cp_dataset_generate(const cp_scene_config* cfg, size_t count, cp_dataset** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = nullptr;
    const confpose::SceneConfig scene = to_scene(*cfg);
    auto h = std::make_unique<cp_dataset>();
    h->ds = confpose::Dataset::from_synthetic(confpose::generate(scene, count), scene);
    *out = h.release();
  });
}

cp_status cp_dataset_load(const char* path, cp_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    auto h = std::make_unique<cp_dataset>();
    h->ds = confpose::load_dataset(path);
    *out = h.release();
  });
}

cp_status cp_dataset_save(const cp_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds && path, "null argument");
    confpose::save_dataset(path, ds->ds);
  });
}

cp_status cp_dataset_size(const cp_dataset* ds, size_t* images, size_t* keypoints) {
  return guarded([&] {
    require(ds, "null dataset");
    if (images) *images = ds->ds.size();
    if (keypoints) *keypoints = ds->ds.model.size();
  });
}

cp_status cp_dataset_hash(const cp_dataset* ds, char* buf, size_t buf_len) {
  return guarded([&] {
    require(ds && buf, "null argument");
    const std::string h = ds->ds.content_hash();
    require(buf_len > h.size(), "buffer too small for the hash");
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

void cp_dataset_free(cp_dataset* ds) { delete ds; }

cp_status cp_calibrate(const cp_dataset* ds, double epsilon, double scale_exponent, cp_calibration** out) {
  return guarded([&] {
    require(ds && out, "null argument");
    *out = nullptr;
    auto h = std::make_unique<cp_calibration>();
    h->cal = confpose::calibrate_dataset(ds->ds, epsilon, scale_exponent);
    *out = h.release();
  });
}

cp_status cp_calibration_load(const char* path, cp_calibration** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    auto h = std::make_unique<cp_calibration>();
    h->cal = confpose::load_calibration(path);
    *out = h.release();
  });
}

cp_status cp_calibration_save(const cp_calibration* cal, const char* path) {
  return guarded([&] {
    require(cal && path, "null argument");
    confpose::save_calibration(path, cal->cal);
  });
}

cp_status cp_calibration_quantile(const cp_calibration* cal, double* q, size_t* rank) {
  return guarded([&] {
    require(cal, "null calibration");
    if (q) *q = cal->cal.quantile;
    if (rank) *rank = confpose::quantile_rank(cal->cal.model.size(), cal->cal.epsilon);
  });
}

void cp_calibration_free(cp_calibration* cal) { delete cal; }

cp_status cp_evaluate(const cp_dataset* ds, const cp_calibration* cal, const cp_evaluate_options* opt,
                      cp_report** out) {
  return guarded([&] {
    require(ds && cal && opt && out, "null argument");
    *out = nullptr;
    confpose::EvaluateOptions o;
    switch (opt->mode) {
      case CP_MODE_DETERMINISTIC: o.mode = confpose::EvalMode::Deterministic; break;
      case CP_MODE_SAMPLING: o.mode = confpose::EvalMode::Sampling; break;
      case CP_MODE_BOTH: o.mode = confpose::EvalMode::Both; break;
      default: require(false, "unknown evaluation mode");
    }
    require(opt->scale == CP_SCALE_PAPER || opt->scale == CP_SCALE_CHI2, "unknown scale mode");
    o.scale = opt->scale == CP_SCALE_PAPER ? confpose::ScaleMode::Paper : confpose::ScaleMode::Chi2;
    o.thresholds = {opt->tau_R_deg3, opt->tau_t_m3};
    o.sampler_trials = opt->sampler_trials;
    o.sampler_seed = opt->sampler_seed;
    o.jobs = opt->jobs;
    auto h = std::make_unique<cp_report>();
    h->run = confpose::evaluate_dataset(ds->ds, cal->cal, o);
    *out = h.release();
  });
}

cp_status cp_report_summary(const cp_report* rep, cp_eval_mode which, cp_summary* out) {
  return guarded([&] {
    require(rep && out, "null argument");
    const auto& src = which == CP_MODE_SAMPLING ? rep->run.sampling : rep->run.deterministic;
    require(which != CP_MODE_BOTH, "ask for one mode at a time");
    require(src.has_value(), "that mode was not evaluated");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    *out = {src->images, src->failed, src->eta_kpt, src->eta_R, src->eta_t,
            src->mean_V_R.value_or(nan), src->mean_V_t.value_or(nan), src->out_R, src->out_t};
  });
}

cp_status cp_report_median_reduction(const cp_report* rep, double* rot_pct, double* trans_pct) {
  return guarded([&] {
    require(rep && rot_pct && trans_pct, "null argument");
    std::vector<double> r, t;
    for (const auto& img : rep->run.images) {
      if (img.deterministic.failed || img.sampling.failed) continue;
      if (!(img.sampling.V_R > 0.0) || !(img.sampling.V_t > 0.0)) continue;
      r.push_back(100.0 * (1.0 - img.deterministic.V_R / img.sampling.V_R));
      t.push_back(100.0 * (1.0 - img.deterministic.V_t / img.sampling.V_t));
    }
    if (r.empty())
      confpose::fail(confpose::ErrorCode::InsufficientSamples, "no image has both region types");
    std::sort(r.begin(), r.end());
    std::sort(t.begin(), t.end());
    *rot_pct = confpose::sorted_quantile(r, 0.5);
    *trans_pct = confpose::sorted_quantile(t, 0.5);
  });
}

cp_status cp_report_save(const cp_report* rep, const char* path, int include_timing) {
  return guarded([&] {
    require(rep && path, "null argument");
    confpose::write_text_file(path, confpose::report_json(rep->run, include_timing != 0));
  });
}

cp_status cp_report_write_exports(const cp_report* rep, const char* prefix, size_t* files_written) {
  return guarded([&] {
    require(rep && prefix, "null argument");
    const auto files = confpose::write_exports(rep->run, prefix);
    if (files_written) *files_written = files.size();
  });
}

void cp_report_free(cp_report* rep) { delete rep; }

cp_status cp_ellipsoid_volume(const double shape[9], double scale, double* out) {
  return guarded([&] {
    require(shape && out, "null argument");
    confpose::Ellipsoid3 e;
    e.shape = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(shape);
    e.scale = scale;
    *out = confpose::ellipsoid_volume(e);
  });
}

cp_status cp_chi2_quantile(int dof, double p, double* out) {
  return guarded([&] {
    require(out, "null argument");
    *out = confpose::chi_square_quantile(dof, p);
  });
}

cp_status cp_hull_volume(const double* xyz, size_t n, double* out) {
  return guarded([&] {
    require(xyz && out, "null argument");
    std::vector<confpose::Vec3> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = confpose::Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    *out = confpose::convex_hull_volume_3d(pts);
  });
}

}  // extern "C"
