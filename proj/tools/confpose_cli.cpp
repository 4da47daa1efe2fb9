// Command-line front end: generate -> calibrate -> evaluate.
// Talks to the library only through the C interface.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "confpose/confpose.h"

namespace {

enum ExitCode {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitEpsilonTooSmall = 3,
  kExitMalformed = 4,
  kExitHashMismatch = 5,
};

int exit_for(cp_status s) {
  switch (s) {
    case CP_OK: return kExitOk;
    case CP_ERR_EPSILON_TOO_SMALL: return kExitEpsilonTooSmall;
    case CP_ERR_MALFORMED_INPUT: return kExitMalformed;
    case CP_ERR_MODEL_MISMATCH: return kExitHashMismatch;
    case CP_ERR_INVALID_ARGUMENT: return kExitUsage;
    default: return kExitFailure;
  }
}

// Throws out of a subcommand with the exit code for the failed call.
struct Failed {
  int code;
};

void check(cp_status s, const char* what) {
  if (s == CP_OK) return;
  spdlog::error("{}: {} ({})", what, cp_last_error(), cp_status_name(s));
  throw Failed{exit_for(s)};
}

std::string fmt_number(double v) {
  if (std::isnan(v)) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_summary(const char* label, const cp_summary& s) {
  std::printf("%s: images %zu (failed %zu)  eta_kpt %.4f  eta_R %.4f  eta_t %.4f\n", label, s.images,
              s.failed, s.eta_kpt, s.eta_R, s.eta_t);
  std::printf("%s: mean V_R %s deg^3 (out %zu)  mean V_t %s m^3 (out %zu)\n", label,
              fmt_number(s.mean_V_R_deg3).c_str(), s.out_R, fmt_number(s.mean_V_t_m3).c_str(), s.out_t);
}

std::string default_export_prefix(const std::string& report_path) {
  const auto dot = report_path.rfind('.');
  const auto slash = report_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return report_path;
  return report_path.substr(0, dot);
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("confpose");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CONFPOSE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; keep the default then
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Conformal keypoint regions and deterministic 6D pose confidence regions"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool no_timing = false;
  app.add_option("--seed", seed, "Seed for generation (poses/noise) and the sampling baseline");
  app.add_option("--jobs", jobs, "Worker threads for per-image evaluation")->check(CLI::PositiveNumber);
  app.add_flag("--no-timing", no_timing, "Leave timings out of the report (byte-stable output)");

  cp_scene_config scene;
  cp_scene_config_default(&scene);
  std::size_t count = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset (JSON lines)");
  gen->add_option("--count", count, "Number of images")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--keypoints", scene.n_keypoints, "Keypoints per object")->check(CLI::Range(4, 1000000));
  gen->add_option("--model-seed", scene.model_seed, "Seed of the object model (share it across splits)");
  gen->add_option("--model-extent", scene.model_extent, "Side of the model cube, m");
  gen->add_option("--depth-min", scene.depth_min, "Minimum depth, m");
  gen->add_option("--depth-max", scene.depth_max, "Maximum depth, m");
  gen->add_option("--max-rotation", scene.max_rotation_deg, "Euler angle range, +- deg");
  gen->add_option("--noise-min", scene.noise_std_min, "Minimum keypoint noise std, px");
  gen->add_option("--noise-max", scene.noise_std_max, "Maximum keypoint noise std, px");
  gen->add_option("--cov-misspecification", scene.cov_misspecification,
                  "Predicted covariance = true variance x this factor");

  std::string cal_dataset, cal_out;
  double epsilon = 0.1, q = 0.25;
  auto* cal = app.add_subcommand("calibrate", "Fit the conformal calibration model");
  cal->add_option("--dataset", cal_dataset, "Calibration dataset")->required()->check(CLI::ExistingFile);
  cal->add_option("--epsilon", epsilon, "Error rate")->required()->check(CLI::Range(0.0, 1.0));
  cal->add_option("--q", q, "Scale exponent on det(cov)");
  cal->add_option("--out", cal_out, "Output calibration model path")->required();

  cp_evaluate_options eo;
  cp_evaluate_options_default(&eo);
  std::string ev_dataset, ev_model, ev_out, ev_exports, mode = "deterministic", scale = "chi2";
  std::vector<double> thresholds;
  auto* ev = app.add_subcommand("evaluate", "Evaluate pose regions on a test dataset");
  ev->add_option("--dataset", ev_dataset, "Test dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--model", ev_model, "Calibration model")->required()->check(CLI::ExistingFile);
  ev->add_option("--mode", mode, "deterministic | sampling | both")
      ->check(CLI::IsMember({"deterministic", "sampling", "both"}));
  ev->add_option("--scale", scale, "Ellipsoid scale: paper (1) | chi2 (chi2_3(1-eps))")
      ->check(CLI::IsMember({"paper", "chi2"}));
  ev->add_option("--thresholds", thresholds, "tau_R (deg^3) and tau_t (m^3)")
      ->expected(2)
      ->check(CLI::PositiveNumber);
  ev->add_option("--trials", eo.sampler_trials, "Sampling-baseline trials per image")->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, "Report path (JSON)")->required();
  ev->add_option("--exports", ev_exports, "Prefix for CDF/boxplot files (default: report path stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      scene.rng_seed = seed;
      cp_dataset* ds = nullptr;
      check(cp_dataset_generate(&scene, count, &ds), "generate");
      const cp_status s = cp_dataset_save(ds, gen_out.c_str());
      cp_dataset_free(ds);
      check(s, "save dataset");
      std::printf("wrote %zu samples (seed %llu, model seed %llu, %d keypoints) to %s\n", count,
                  static_cast<unsigned long long>(seed), static_cast<unsigned long long>(scene.model_seed),
                  scene.n_keypoints, gen_out.c_str());
    } else if (*cal) {
      cp_dataset* ds = nullptr;
      check(cp_dataset_load(cal_dataset.c_str(), &ds), "load dataset");
      cp_calibration* model = nullptr;
      const cp_status s = cp_calibrate(ds, epsilon, q, &model);
      std::size_t l = 0;
      cp_dataset_size(ds, &l, nullptr);
      cp_dataset_free(ds);
      check(s, "calibrate");
      double quantile = 0.0;
      std::size_t rank = 0;
      cp_calibration_quantile(model, &quantile, &rank);
      const cp_status saved = cp_calibration_save(model, cal_out.c_str());
      cp_calibration_free(model);
      check(saved, "save calibration");
      std::printf("quantile %.17g (rank %zu of %zu, epsilon %g, q %g)\n", quantile, rank, l, epsilon, q);
    } else if (*ev) {
      eo.mode = mode == "both" ? CP_MODE_BOTH : mode == "sampling" ? CP_MODE_SAMPLING : CP_MODE_DETERMINISTIC;
      eo.scale = scale == "paper" ? CP_SCALE_PAPER : CP_SCALE_CHI2;
      if (!thresholds.empty()) {
        eo.tau_R_deg3 = thresholds[0];
        eo.tau_t_m3 = thresholds[1];
      }
      eo.sampler_seed = seed;
      eo.jobs = jobs;
      cp_dataset* ds = nullptr;
      check(cp_dataset_load(ev_dataset.c_str(), &ds), "load dataset");
      cp_calibration* model = nullptr;
      const cp_status loaded = cp_calibration_load(ev_model.c_str(), &model);
      if (loaded != CP_OK) cp_dataset_free(ds);
      check(loaded, "load calibration");
      spdlog::info("evaluating {} mode, {} scale, {} job(s)", mode, scale, jobs);
      cp_report* rep = nullptr;
      const cp_status s = cp_evaluate(ds, model, &eo, &rep);
      cp_dataset_free(ds);
      cp_calibration_free(model);
      check(s, "evaluate");
      cp_status w = cp_report_save(rep, ev_out.c_str(), no_timing ? 0 : 1);
      std::size_t files = 0;
      if (w == CP_OK)
        w = cp_report_write_exports(rep, (ev_exports.empty() ? default_export_prefix(ev_out) : ev_exports).c_str(),
                                    &files);
      if (w == CP_OK) {
        cp_summary sum;
        if (eo.mode != CP_MODE_SAMPLING && cp_report_summary(rep, CP_MODE_DETERMINISTIC, &sum) == CP_OK)
          print_summary("deterministic", sum);
        if (eo.mode != CP_MODE_DETERMINISTIC && cp_report_summary(rep, CP_MODE_SAMPLING, &sum) == CP_OK)
          print_summary("sampling", sum);
        double red_r = 0.0, red_t = 0.0;
        if (eo.mode == CP_MODE_BOTH && cp_report_median_reduction(rep, &red_r, &red_t) == CP_OK)
          std::printf("median volume reduction: rotation %.2f%%  translation %.2f%%\n", red_r, red_t);
        std::printf("report written to %s (%zu export files)\n", ev_out.c_str(), files);
      }
      cp_report_free(rep);
      check(w, "write report");
    }
  } catch (const Failed& f) {
    return f.code;
  }
  return kExitOk;
}
