/* vnnbrain.h — C interface to the covariance neural network brain-age
 * toolkit. All functions return vnb_status; on failure, vnb_last_error()
 * holds a thread-local description. Every object returned through an
 * out-parameter must be released with the matching *_free call. */

#ifndef VNNBRAIN_H
#define VNNBRAIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vnb_status {
  VNB_OK = 0,
  VNB_ERR_USAGE = 1,    /* bad arguments or configuration */
  VNB_ERR_DATA = 2,     /* missing/malformed data files, schema violations */
  VNB_ERR_NUMERIC = 3,  /* non-convergence, divergence, degenerate input */
  VNB_ERR_INTERNAL = 4
} vnb_status;

const char* vnb_version(void);
const char* vnb_last_error(void);

/* ---- cohorts ---- */
typedef struct vnb_cohort vnb_cohort;

vnb_status vnb_cohort_load_csv(const char* path, const char* scale_tag, vnb_cohort** out);
vnb_status vnb_cohort_save_csv(const vnb_cohort* cohort, const char* path);
size_t vnb_cohort_size(const vnb_cohort* cohort);
size_t vnb_cohort_dim(const vnb_cohort* cohort);
/* Copies subject i's features into `features` (length = vnb_cohort_dim). */
vnb_status vnb_cohort_features(const vnb_cohort* cohort, size_t index, double* features);
void vnb_cohort_free(vnb_cohort* cohort);

/* ---- covariance ---- */
typedef struct vnb_covariance vnb_covariance;

/* normalize != 0 rescales so the largest eigenvalue is 1. */
vnb_status vnb_covariance_compute(const vnb_cohort* cohort, int normalize, vnb_covariance** out);
size_t vnb_covariance_dim(const vnb_covariance* cov);
/* Pre-normalization largest eigenvalue (1.0 if never normalized). */
double vnb_covariance_spectral_norm(const vnb_covariance* cov);
vnb_status vnb_covariance_entry(const vnb_covariance* cov, size_t row, size_t col, double* out);
void vnb_covariance_free(vnb_covariance* cov);

/* ---- trained ensembles ---- */
typedef struct vnb_ensemble vnb_ensemble;

/* Configs are JSON fragments matching the `vnn` and `train` sections of an
 * experiment config. */
vnb_status vnb_train_ensemble(const vnb_cohort* cohort, const char* vnn_config_json,
                              const char* train_config_json, int threads, vnb_ensemble** out);
vnb_status vnb_ensemble_save(const vnb_ensemble* ens, const char* path);
vnb_status vnb_ensemble_load(const char* path, vnb_ensemble** out);
size_t vnb_ensemble_size(const vnb_ensemble* ens);
/* Ensemble-mean age estimate for one feature vector of length dim; the
 * covariance may come from a cohort of any dimension. */
vnb_status vnb_ensemble_predict(const vnb_ensemble* ens, const vnb_covariance* cov,
                                const double* features, size_t dim, double* out);
void vnb_ensemble_free(vnb_ensemble* ens);

/* ---- experiment runner (the CLI surface) ---- */
typedef struct vnb_experiment vnb_experiment;

vnb_status vnb_experiment_open(const char* config_path, vnb_experiment** out);
vnb_status vnb_experiment_set_out_dir(vnb_experiment* exp, const char* out_dir);
vnb_status vnb_experiment_set_seed(vnb_experiment* exp, uint64_t master_seed);
vnb_status vnb_experiment_set_threads(vnb_experiment* exp, int threads);
/* command is one of "gen" | "train" | "brainage" | "transfer". */
vnb_status vnb_experiment_run(vnb_experiment* exp, const char* command);
void vnb_experiment_free(vnb_experiment* exp);

/* Statistics over a delta-age report file; out_dir NULL or empty writes next
 * to the report. */
vnb_status vnb_stats_report(const char* report_path, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* VNNBRAIN_H */
