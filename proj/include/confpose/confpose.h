/* C interface to libconfpose.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every call returns a cp_status; on failure cp_last_error() holds a message
 * for the calling thread until its next failing call. */
#ifndef CONFPOSE_H
#define CONFPOSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CP_API __declspec(dllexport)
#else
#define CP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cp_status {
  CP_OK = 0,
  CP_ERR_INVALID_ARGUMENT = 1,
  CP_ERR_NOT_A_ROTATION = 2,
  CP_ERR_BEHIND_CAMERA = 3,
  CP_ERR_DEGENERATE_COVARIANCE = 4,
  CP_ERR_LENGTH_MISMATCH = 5,
  CP_ERR_EPSILON_TOO_SMALL = 6,
  CP_ERR_ALL_POINTS_BEHIND_CAMERA = 7,
  CP_ERR_SINGULAR_NORMAL_EQUATIONS = 8,
  CP_ERR_DEGENERATE_MODEL = 9,
  CP_ERR_NOT_STATIONARY = 10,
  CP_ERR_ILL_CONDITIONED = 11,
  CP_ERR_DIMENSION_MISMATCH = 12,
  CP_ERR_DEGENERATE_SHAPE = 13,
  CP_ERR_DEGENERATE_HULL = 14,
  CP_ERR_INSUFFICIENT_SAMPLES = 15,
  CP_ERR_GENERATION_EXHAUSTED = 16,
  CP_ERR_MALFORMED_INPUT = 17,
  CP_ERR_MODEL_MISMATCH = 18,
  CP_ERR_IO = 19,
  CP_ERR_INTERNAL = 100
} cp_status;

typedef struct cp_dataset cp_dataset;
typedef struct cp_calibration cp_calibration;
typedef struct cp_report cp_report;

typedef struct cp_scene_config {
  int n_keypoints;
  double model_extent;
  double depth_min, depth_max;
  double max_rotation_deg;
  double noise_std_min, noise_std_max;
  double cov_misspecification;
  uint64_t rng_seed;
  uint64_t model_seed;
} cp_scene_config;

typedef enum cp_eval_mode { CP_MODE_DETERMINISTIC = 0, CP_MODE_SAMPLING = 1, CP_MODE_BOTH = 2 } cp_eval_mode;
typedef enum cp_scale_mode { CP_SCALE_PAPER = 0, CP_SCALE_CHI2 = 1 } cp_scale_mode;

typedef struct cp_evaluate_options {
  cp_eval_mode mode;
  cp_scale_mode scale;
  double tau_R_deg3;
  double tau_t_m3;
  size_t sampler_trials;
  uint64_t sampler_seed;
  unsigned jobs;
} cp_evaluate_options;

/* Aggregate numbers of one evaluated mode. NaN marks an undefined mean. */
typedef struct cp_summary {
  size_t images, failed;
  double eta_kpt, eta_R, eta_t;
  double mean_V_R_deg3, mean_V_t_m3;
  size_t out_R, out_t;
} cp_summary;

CP_API const char* cp_last_error(void);
CP_API const char* cp_status_name(cp_status status);
CP_API const char* cp_version(void);

CP_API void cp_scene_config_default(cp_scene_config* cfg);
CP_API void cp_evaluate_options_default(cp_evaluate_options* opt);

CP_API cp_status cp_dataset_generate(const cp_scene_config* cfg, size_t count, cp_dataset** out);
CP_API cp_status cp_dataset_load(const char* path, cp_dataset** out);
CP_API cp_status cp_dataset_save(const cp_dataset* ds, const char* path);
CP_API cp_status cp_dataset_size(const cp_dataset* ds, size_t* images, size_t* keypoints);
CP_API cp_status cp_dataset_hash(const cp_dataset* ds, char* buf, size_t buf_len);
CP_API void cp_dataset_free(cp_dataset* ds);

CP_API cp_status cp_calibrate(const cp_dataset* ds, double epsilon, double scale_exponent,
                              cp_calibration** out);
CP_API cp_status cp_calibration_load(const char* path, cp_calibration** out);
CP_API cp_status cp_calibration_save(const cp_calibration* cal, const char* path);
/* Quantile at the stored epsilon, and the rank floor(l * eps) it came from. */
CP_API cp_status cp_calibration_quantile(const cp_calibration* cal, double* quantile, size_t* rank);
CP_API void cp_calibration_free(cp_calibration* cal);

CP_API cp_status cp_evaluate(const cp_dataset* ds, const cp_calibration* cal,
                             const cp_evaluate_options* opt, cp_report** out);
CP_API cp_status cp_report_summary(const cp_report* rep, cp_eval_mode which, cp_summary* out);
/* Median paired volume reduction in percent (both mode only). */
CP_API cp_status cp_report_median_reduction(const cp_report* rep, double* rot_pct, double* trans_pct);
CP_API cp_status cp_report_save(const cp_report* rep, const char* path, int include_timing);
/* Columnar CDF/boxplot files named <prefix>.<mode>.<V_R|V_t>.<cdf|box>.txt */
CP_API cp_status cp_report_write_exports(const cp_report* rep, const char* prefix, size_t* files_written);
CP_API void cp_report_free(cp_report* rep);

/* Pure helpers. */
CP_API cp_status cp_ellipsoid_volume(const double shape[9], double scale, double* out);
CP_API cp_status cp_chi2_quantile(int dof, double p, double* out);
CP_API cp_status cp_hull_volume(const double* points_xyz, size_t n_points, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CONFPOSE_H */
