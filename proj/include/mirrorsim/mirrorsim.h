#ifndef MIRRORSIM_MIRRORSIM_H
#define MIRRORSIM_MIRRORSIM_H

/* C interface of the mirror-mode simulator.
 *
 * Every function returns an msim_status; MSIM_OK is zero. On failure the
 * message of the last error on the calling thread is available from
 * msim_last_error(). Objects are opaque handles released with the matching
 * *_free function (NULL is accepted). Units are SI throughout. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MSIM_BUILDING_LIBRARY)
#define MSIM_API __declspec(dllexport)
#else
#define MSIM_API __declspec(dllimport)
#endif
#elif defined(MSIM_BUILDING_LIBRARY)
#define MSIM_API __attribute__((visibility("default")))
#else
#define MSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum msim_status {
  MSIM_OK = 0,
  MSIM_ERR_INVALID_ARGUMENT = 1,
  MSIM_ERR_CONFIG = 2,
  MSIM_ERR_DOMAIN = 3,
  MSIM_ERR_THRESHOLD = 4,
  MSIM_ERR_DIVERGENCE = 5,
  MSIM_ERR_FIT = 6,
  MSIM_ERR_CALIBRATION = 7,
  MSIM_ERR_IO = 8,
  MSIM_ERR_INSUFFICIENT_DATA = 9,
  MSIM_ERR_INTERNAL = 10
} msim_status;

MSIM_API const char* msim_version(void);
MSIM_API const char* msim_status_string(msim_status status);
/* Thread-local; empty string when the last call succeeded. */
MSIM_API const char* msim_last_error(void);

/* ---- model ------------------------------------------------------------ */

typedef struct msim_oscillator {
  double resonance_angular_frequency; /* rad/s */
  double quality_factor;
  double effective_mass; /* kg */
} msim_oscillator;

MSIM_API void msim_oscillator_paper(msim_oscillator* out);
MSIM_API void msim_oscillator_scaled(msim_oscillator* out);
MSIM_API msim_status msim_damping_rate(const msim_oscillator* p, double* gamma);
MSIM_API msim_status msim_susceptibility(const msim_oscillator* p, double gain, double omega, double* re,
                                         double* im);
MSIM_API msim_status msim_langevin_force_psd(const msim_oscillator* p, double temperature, double* psd);
MSIM_API msim_status msim_thermal_variance(const msim_oscillator* p, double temperature, double* variance);
MSIM_API msim_status msim_effective_temperature(double temperature, double gain, double* t_eff);
MSIM_API msim_status msim_effective_dampings(const msim_oscillator* p, double gain, double* gamma1,
                                             double* gamma2);
MSIM_API msim_status msim_parametric_variances(const msim_oscillator* p, double temperature, double gain,
                                               double* var1, double* var2);
MSIM_API msim_status msim_autocorrelation_model(double variance, double gamma_eff, double tau, double* value);
MSIM_API msim_status msim_saturation_amplitude(double light_power, const msim_oscillator* p, double* force,
                                               double* mean_amplitude);

/* ---- readout / demodulation ------------------------------------------- */

typedef struct msim_optics {
  double finesse;
  double wavelength;        /* m */
  double cavity_length;     /* m */
  double sensitivity_floor; /* m/sqrt(Hz) */
} msim_optics;

MSIM_API void msim_optics_default(msim_optics* out);
MSIM_API msim_status msim_frequency_calibration(double delta_nu, const msim_optics* optics, double* meters);
/* Calibration fixed by a 200 Hz modulation read as 27 mV. */
MSIM_API msim_status msim_volts_to_meters(double volts, const msim_optics* optics, double* meters);
MSIM_API msim_status msim_meters_to_volts(double meters, const msim_optics* optics, double* volts);
/* Bandpass centre in rad/s, width and cutoff in Hz; measured by simulation. */
MSIM_API msim_status msim_noise_equivalent_displacement(double bandpass_center, double bandpass_width,
                                                        double lowpass_cutoff, double delta_x_min,
                                                        double* delta_x);

/* ---- configuration ----------------------------------------------------- */

typedef struct msim_config msim_config;
typedef struct msim_diagnostics msim_diagnostics;

/* preset: "paper" or "scaled". */
MSIM_API msim_status msim_config_new(const char* preset, msim_config** out);
/* Parses a key/value file. A config is returned even when diagnostics are
 * present; MSIM_ERR_IO when the file cannot be read. */
MSIM_API msim_status msim_config_load(const char* path, msim_config** out, msim_diagnostics** diagnostics);
MSIM_API msim_status msim_config_set(msim_config* cfg, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf; *needed receives the size
 * including the terminator. */
MSIM_API msim_status msim_config_get(const msim_config* cfg, const char* key, char* buf, size_t capacity,
                                     size_t* needed);
MSIM_API msim_status msim_config_validate(const msim_config* cfg, msim_diagnostics** diagnostics);
/* "key = value" lines for every key, fully resolved. */
MSIM_API msim_status msim_config_dump(const msim_config* cfg, char* buf, size_t capacity, size_t* needed);
MSIM_API void msim_config_free(msim_config* cfg);

MSIM_API size_t msim_diagnostics_count(const msim_diagnostics* d);
MSIM_API const char* msim_diagnostics_message(const msim_diagnostics* d, size_t index);
MSIM_API void msim_diagnostics_free(msim_diagnostics* d);

/* ---- traces ------------------------------------------------------------ */

typedef struct msim_trace msim_trace;

MSIM_API msim_status msim_simulate(const msim_config* cfg, uint64_t seed, msim_trace** out);
MSIM_API msim_status msim_trace_from_arrays(double sample_period, const double* x1, const double* x2, size_t n,
                                            msim_trace** out);
MSIM_API size_t msim_trace_size(const msim_trace* t);
MSIM_API double msim_trace_sample_period(const msim_trace* t);
MSIM_API msim_status msim_trace_copy(const msim_trace* t, double* x1, double* x2, size_t n);
MSIM_API msim_status msim_trace_rotate(const msim_trace* t, double theta, msim_trace** out);
MSIM_API msim_status msim_trace_write_csv(const msim_trace* t, const char* path);
MSIM_API void msim_trace_free(msim_trace* t);

/* ---- analysis ---------------------------------------------------------- */

typedef struct msim_histogram msim_histogram;
typedef struct msim_correlation msim_correlation;
typedef struct msim_jumps msim_jumps;

MSIM_API msim_status msim_dispersions(const msim_trace* t, double* dx1, double* dx2);

MSIM_API msim_status msim_histogram_new(const msim_trace* t, double full_scale, msim_histogram** out);
MSIM_API uint64_t msim_histogram_cell(const msim_histogram* h, size_t row, size_t column);
MSIM_API uint64_t msim_histogram_total(const msim_histogram* h);
MSIM_API uint64_t msim_histogram_overflow(const msim_histogram* h);
MSIM_API double msim_histogram_cell_width(const msim_histogram* h);
MSIM_API msim_status msim_histogram_write(const msim_histogram* h, const char* path);
MSIM_API void msim_histogram_free(msim_histogram* h);

/* i, j in {1, 2}; for i == j an exponential fit is attempted as well. */
MSIM_API msim_status msim_correlation_new(const msim_trace* t, int i, int j, double tau_max,
                                          msim_correlation** out);
MSIM_API size_t msim_correlation_size(const msim_correlation* c);
MSIM_API double msim_correlation_lag_step(const msim_correlation* c);
MSIM_API const double* msim_correlation_values(const msim_correlation* c);
/* MSIM_ERR_FIT when no fit is available. */
MSIM_API msim_status msim_correlation_fit(const msim_correlation* c, double* gamma, double* variance,
                                          double* residual);
MSIM_API void msim_correlation_free(msim_correlation* c);

MSIM_API msim_status msim_estimate_gain(const double* estimates, size_t n, double* mean, double* spread,
                                        int* consistent);

MSIM_API msim_status msim_detect_jumps(const msim_trace* t, double threshold, msim_jumps** out);
MSIM_API size_t msim_jumps_count(const msim_jumps* j);
MSIM_API size_t msim_jumps_dwell_count(const msim_jumps* j);
MSIM_API const double* msim_jumps_dwell_times(const msim_jumps* j);
MSIM_API void msim_jumps_lobe_means(const msim_jumps* j, double* positive, double* negative);
MSIM_API void msim_jumps_free(msim_jumps* j);

/* ---- scenarios --------------------------------------------------------- */

typedef struct msim_report msim_report;

typedef struct msim_run_options {
  int has_duration;
  double duration; /* s */
  int has_gain;
  double gain;
  const char* output_dir; /* NULL or "" writes no files */
  unsigned threads;       /* 0: one per hardware thread */
} msim_run_options;

/* scenario: free, cold_damp, param_below, param_above, gain_sweep, noise_floor. */
MSIM_API msim_status msim_run_scenario(const msim_config* cfg, const char* scenario, uint64_t seed,
                                       const msim_run_options* options, msim_report** out);
MSIM_API const char* msim_report_text(const msim_report* r);
MSIM_API int msim_report_passed(const msim_report* r);
MSIM_API size_t msim_report_failures(const msim_report* r);
MSIM_API void msim_report_free(msim_report* r);

#ifdef __cplusplus
}
#endif

#endif
