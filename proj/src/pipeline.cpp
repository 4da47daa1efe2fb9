#include "confpose/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "confpose/error.hpp"
#include "confpose/sampler.hpp"
#include "confpose/stats.hpp"

namespace confpose {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json("N/A"); }

json report_fields(const EvaluationReport& r) {
  json radii = json::array();
  for (double v : r.radii_stats) radii.push_back(v);
  return {{"images", r.images},
          {"failed", r.failed},
          {"eta_kpt", r.eta_kpt},
          {"eta_R", r.eta_R},
          {"eta_t", r.eta_t},
          {"mean_V_R_deg3", optional_number(r.mean_V_R)},
          {"mean_V_t_m3", optional_number(r.mean_V_t)},
          {"out_R", r.out_R},
          {"out_t", r.out_t},
          {"mean_radius_per_keypoint_px", radii}};
}

json image_result_json(const ImageResult& r) {
  return {{"V_R_deg3", r.V_R},
          {"V_t_m3", r.V_t},
          {"rotation_inside", r.rotation_inside},
          {"translation_inside", r.translation_inside}};
}

json times_json(const StageTimes& t) {
  return {{"predict_region", t.predict_ms},
          {"solve", t.solve_ms},
          {"region_from_conformal", t.region_ms},
          {"sampling", t.sampling_ms},
          {"deterministic_total", t.deterministic_ms()}};
}

bool wants_deterministic(EvalMode m) { return m != EvalMode::Sampling; }
bool wants_sampling(EvalMode m) { return m != EvalMode::Deterministic; }

}  // namespace

const char* eval_mode_name(EvalMode m) noexcept {
  switch (m) {
    case EvalMode::Deterministic: return "deterministic";
    case EvalMode::Sampling: return "sampling";
    case EvalMode::Both: return "both";
  }
  return "unknown";
}

const char* scale_mode_name(ScaleMode m) noexcept {
  return m == ScaleMode::Paper ? "paper" : "chi2";
}

StageTimes& StageTimes::operator+=(const StageTimes& o) {
  predict_ms += o.predict_ms;
  solve_ms += o.solve_ms;
  region_ms += o.region_ms;
  sampling_ms += o.sampling_ms;
  return *this;
}

ImageEvaluation evaluate_one(const Dataset& ds, std::size_t index, double alpha, double scale_exponent,
                             double epsilon, const EvaluateOptions& opt) {
  ImageEvaluation ev;
  ev.index = index;
  const DatasetRecord& rec = ds.records.at(index);
  const PnPProblem problem = ds.problem(index);

  auto t0 = Clock::now();
  const KeypointConfidenceRegion region2d =
      region_from_quantile(rec.predicted, scale_exponent, alpha, ds.image_diagonal());
  ev.times.predict_ms = ms_since(t0);
  ev.keypoints_covered = contains(region2d, rec.gt_keypoints);
  for (std::size_t n = 0; n < region2d.size(); ++n) {
    ev.mean_radius += region2d.radii[n];
    ev.capped += region2d.capped[n] ? 1 : 0;
  }
  ev.mean_radius /= static_cast<double>(region2d.size());

  std::optional<PnPSolution> sol;
  t0 = Clock::now();
  try {
    sol = solve(problem, initial_pose(problem), opt.solver);
    ev.solver_iterations = sol->iterations;
    ev.solver_cost = sol->final_cost;
  } catch (const Error& e) {
    ev.deterministic_error = e.what();
  }
  ev.times.solve_ms = ms_since(t0);

  for (auto* r : {&ev.deterministic, &ev.sampling}) {
    r->keypoints_covered = ev.keypoints_covered;
    r->radii = region2d.radii;
    r->failed = true;
  }

  if (wants_deterministic(opt.mode) && sol) {
    t0 = Clock::now();
    try {
      RegionOptions ro;
      ro.scale_mode = opt.scale;
      const PoseConfidenceRegion region = region_from_conformal(problem, *sol, region2d, epsilon, ro);
      ev.deterministic = evaluate_image(region2d, rec.gt_keypoints, region, rec.gt_pose);
    } catch (const Error& e) {
      ev.deterministic_error = e.what();
    }
    ev.times.region_ms = ms_since(t0);
  }
  if (!wants_deterministic(opt.mode)) ev.deterministic_error.clear();

  if (wants_sampling(opt.mode)) {
    t0 = Clock::now();
    try {
      SamplerConfig sc;
      sc.trials = opt.sampler_trials;
      sc.rng_seed = derive_seed(opt.sampler_seed, index);
      sc.solver = opt.solver;
      const SampledPoseRegion s = sol ? sample_region(problem, region2d, sol->pose, sc)
                                      : sample_region(problem, region2d, sc);
      ev.accepted = s.accepted;
      ev.attempted = s.attempted;
      if (s.insufficient()) {
        ev.sampling_error = "InsufficientSamples: " + std::to_string(s.accepted) + " of " +
                            std::to_string(s.attempted) + " samples accepted";
      } else {
        ImageResult& r = ev.sampling;
        r.failed = false;
        r.V_R = *s.hull_R_volume;
        r.V_t = *s.hull_t_volume;
        r.rotation_inside = s.rotation_contains(rec.gt_pose.euler);
        r.translation_inside = s.translation_contains(rec.gt_pose.translation);
      }
    } catch (const Error& e) {
      ev.sampling_error = e.what();
    }
    ev.times.sampling_ms = ms_since(t0);
  }
  return ev;
}

EvaluationRun evaluate_dataset(const Dataset& ds, const CalibrationFile& cal, const EvaluateOptions& opt) {
  opt.thresholds.validate();
  opt.solver.validate();
  if (opt.sampler_trials < 1) fail(ErrorCode::InvalidArgument, "sampler trials must be at least 1");
  if (ds.content_hash() != cal.content_hash)
    fail(ErrorCode::ModelMismatch, "calibration was fitted on a different camera/model (hash " +
                                       cal.content_hash + ", dataset " + ds.content_hash() + ")");
  EvaluationRun run;
  run.options = opt;
  run.epsilon = cal.epsilon;
  run.scale_exponent = cal.model.scale_exponent;
  run.quantile = quantile(cal.model, cal.epsilon);
  run.kappa = default_kappa(cal.epsilon);
  run.ellipsoid_scale = opt.scale == ScaleMode::Paper ? 1.0 : chi_square_quantile(3, 1.0 - cal.epsilon);
  run.calibration_size = cal.model.size();
  run.content_hash = cal.content_hash;
  run.generator = ds.generator;
  run.images.resize(ds.size());

  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(ds.size())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (std::size_t i; !stop && (i = next++) < ds.size();) {
      try {
        run.images[i] = evaluate_one(ds, i, run.quantile, run.scale_exponent, run.epsilon, opt);
      } catch (...) {
        if (!stop.exchange(true)) first_error = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<ImageResult> det, samp;
  for (const auto& img : run.images) {
    run.total += img.times;
    det.push_back(img.deterministic);
    samp.push_back(img.sampling);
  }
  if (wants_deterministic(opt.mode)) run.deterministic = summarize(det, opt.thresholds);
  if (wants_sampling(opt.mode)) run.sampling = summarize(samp, opt.thresholds);
  return run;
}

std::string report_json(const EvaluationRun& run, bool include_timing) {
  const auto& o = run.options;
  json config = {{"mode", eval_mode_name(o.mode)},
                 {"epsilon", run.epsilon},
                 {"scale_exponent_q", run.scale_exponent},
                 {"calibration_size", run.calibration_size},
                 {"calibration_quantile", run.quantile},
                 {"kappa_mode", "sqrt(chi2_2(1-eps))"},
                 {"kappa", run.kappa},
                 {"scale_mode", scale_mode_name(o.scale)},
                 {"ellipsoid_scale", run.ellipsoid_scale},
                 {"thresholds", {{"tau_R_deg3", o.thresholds.tau_R}, {"tau_t_m3", o.thresholds.tau_t}}},
                 {"euler_convention", kEulerConventionTag},
                 {"euler_membership", "per-axis wrapped difference in (-180, 180] deg"},
                 {"solver", {{"loss", o.solver.loss == RobustLoss::Huber ? "huber" : "squared"},
                             {"huber_delta", o.solver.huber_delta},
                             {"weighted", o.solver.use_weights},
                             {"max_iters", o.solver.max_iters}}},
                 {"sampler", {{"trials", o.sampler_trials}, {"seed", o.sampler_seed},
                              {"per_image_seed", "derive_seed(seed, image index)"}}},
                 {"content_hash", run.content_hash}};
  if (run.generator)
    config["dataset_seeds"] = {{"rng_seed", run.generator->rng_seed}, {"model_seed", run.generator->model_seed}};

  json doc = {{"format", "confpose-report"}, {"version", 1}, {"config", config}};
  if (run.deterministic) doc["deterministic"] = report_fields(*run.deterministic);
  if (run.sampling) doc["sampling"] = report_fields(*run.sampling);

  json images = json::array();
  std::vector<double> red_R, red_t;
  for (const auto& img : run.images) {
    json j = {{"index", img.index},
              {"keypoints_covered", img.keypoints_covered},
              {"mean_radius_px", img.mean_radius},
              {"capped_radii", img.capped}};
    if (run.deterministic) {
      json d = {{"status", img.deterministic.failed ? img.deterministic_error : "ok"}};
      if (!img.deterministic.failed) {
        d.update(image_result_json(img.deterministic));
        d["solver_iterations"] = img.solver_iterations;
        d["solver_cost"] = img.solver_cost;
      }
      j["deterministic"] = d;
    }
    if (run.sampling) {
      json s = {{"status", img.sampling.failed ? img.sampling_error : "ok"},
                {"accepted", img.accepted},
                {"attempted", img.attempted}};
      if (!img.sampling.failed) s.update(image_result_json(img.sampling));
      j["sampling"] = s;
    }
    if (run.deterministic && run.sampling && !img.deterministic.failed && !img.sampling.failed &&
        img.sampling.V_R > 0.0 && img.sampling.V_t > 0.0) {
      const double rr = 100.0 * (1.0 - img.deterministic.V_R / img.sampling.V_R);
      const double rt = 100.0 * (1.0 - img.deterministic.V_t / img.sampling.V_t);
      j["volume_reduction_pct"] = {{"R", rr}, {"t", rt}};
      red_R.push_back(rr);
      red_t.push_back(rt);
    }
    if (include_timing) j["timing_ms"] = times_json(img.times);
    images.push_back(j);
  }
  if (!red_R.empty()) {
    std::sort(red_R.begin(), red_R.end());
    std::sort(red_t.begin(), red_t.end());
    doc["paired"] = {{"images", red_R.size()},
                     {"median_volume_reduction_pct_R", sorted_quantile(red_R, 0.5)},
                     {"median_volume_reduction_pct_t", sorted_quantile(red_t, 0.5)}};
  }
  if (include_timing) {
    const double n = static_cast<double>(std::max<std::size_t>(1, run.images.size()));
    StageTimes mean = run.total;
    mean.predict_ms /= n;
    mean.solve_ms /= n;
    mean.region_ms /= n;
    mean.sampling_ms /= n;
    doc["timing_ms"] = {{"total", times_json(run.total)}, {"per_image_mean", times_json(mean)}};
  }
  doc["images"] = images;
  return doc.dump(2) + "\n";
}

std::vector<std::string> write_exports(const EvaluationRun& run, const std::string& prefix) {
  std::vector<std::string> written;
  auto emit = [&](const char* mode, const std::optional<EvaluationReport>& rep) {
    if (!rep || rep->volume_samples.empty()) return;
    std::vector<double> vr, vt;
    for (const auto& [r, t] : rep->volume_samples) {
      vr.push_back(r);
      vt.push_back(t);
    }
    const std::string flags = std::string("mode=") + mode + " scale=" + scale_mode_name(run.options.scale) +
                              " epsilon=" + json(run.epsilon).dump();
    for (const auto& [name, unit, data] :
         {std::tuple{"V_R", "deg^3", &vr}, std::tuple{"V_t", "m^3", &vt}}) {
      const std::string base = prefix + "." + mode + "." + name;
      std::ostringstream cdf, box;
      write_cdf(cdf, *data, std::string(name) + " [" + unit + "] " + flags + "; columns: value cdf");
      write_boxplot(box, boxplot(*data), std::string(name) + " [" + unit + "] " + flags);
      write_text_file(base + ".cdf.txt", cdf.str());
      write_text_file(base + ".box.txt", box.str());
      written.push_back(base + ".cdf.txt");
      written.push_back(base + ".box.txt");
    }
  };
  emit("deterministic", run.deterministic);
  emit("sampling", run.sampling);
  return written;
}

}  // namespace confpose
