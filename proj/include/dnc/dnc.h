#ifndef DNC_DNC_H
#define DNC_DNC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DNC_BUILDING_LIBRARY)
#    define DNC_API __declspec(dllexport)
#  else
#    define DNC_API __declspec(dllimport)
#  endif
#else
#  define DNC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dnc_status {
  DNC_OK = 0,
  DNC_ERR_INVALID_ARGUMENT = 1,
  DNC_ERR_CONFIG = 2,
  DNC_ERR_DIVERGENCE = 3,
  DNC_ERR_NUMERICAL = 4,
  DNC_ERR_IO = 5
} dnc_status;

typedef struct dnc_experiment dnc_experiment;

typedef struct dnc_run_summary {
  int rounds;
  int diverged;
  int divergence_round; /* -1 when the guard never fired */
  double alpha;
  double initial_max_err;
  double peak_max_err;
  double final_max_err;
  double final_max_consensus;
  double consensus_floor;
  double fitted_ratio;
  double theoretical_rate; /* NaN when not applicable */
} dnc_run_summary;

/* Message for the most recent failure on the calling thread; never NULL. */
DNC_API const char* dnc_last_error(void);
DNC_API const char* dnc_version(void);
DNC_API const char* dnc_status_name(dnc_status s);

DNC_API dnc_status dnc_experiment_load(const char* config_path, dnc_experiment** out);
/* name: "fig1", "fig2" or "fig3" */
DNC_API dnc_status dnc_experiment_preset(const char* name, dnc_experiment** out);
DNC_API void dnc_experiment_free(dnc_experiment* e);

DNC_API dnc_status dnc_experiment_set_seed(dnc_experiment* e, uint64_t seed);
DNC_API dnc_status dnc_experiment_set_rounds(dnc_experiment* e, int rounds);
DNC_API dnc_status dnc_experiment_set_output(dnc_experiment* e, const char* dir);
DNC_API dnc_status dnc_experiment_output(const dnc_experiment* e, const char** dir);

/* Writes trace_<label>.csv per run and summary.csv into the output directory.
   Returns DNC_ERR_DIVERGENCE, after writing everything, if any run hit the guard. */
DNC_API dnc_status dnc_experiment_run(dnc_experiment* e);
DNC_API dnc_status dnc_experiment_run_count(const dnc_experiment* e, size_t* count);
DNC_API dnc_status dnc_experiment_run_label(const dnc_experiment* e, size_t index, const char** label);
/* Valid after dnc_experiment_run. */
DNC_API dnc_status dnc_experiment_summary(const dnc_experiment* e, size_t index, dnc_run_summary* out);

/* Writes scan_alpha.csv for the first run's instance. */
DNC_API dnc_status dnc_experiment_scan_alpha(dnc_experiment* e, double* alpha_opt, double* offline_alpha);
/* Writes spectrum.csv. power_lambda2 is NaN for directed topologies. */
DNC_API dnc_status dnc_experiment_estimate_spectrum(dnc_experiment* e, double* lambda2_modulus, double* power_lambda2);

DNC_API dnc_status dnc_offline_alpha(double lambda2_re, double lambda2_im, double* alpha);
DNC_API dnc_status dnc_adaptive_alpha(double lambda2_re, double lambda2_im, double s, double* alpha);
DNC_API dnc_status dnc_ring_lambda2(int nodes, double self_w, double off1, double off2, double* re, double* im,
                                    double* modulus);

#ifdef __cplusplus
}
#endif

#endif
