#include "mirrorsim/mirrorsim.h"

#include <charconv>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "demodulation.hpp"
#include "error.hpp"
#include "io.hpp"
#include "model.hpp"
#include "readout.hpp"
#include "scenario.hpp"
#include "simulator.hpp"

using namespace mirrorsim;

struct msim_config {
  ExperimentConfig cfg;
};
struct msim_diagnostics {
  std::vector<std::string> messages;
};
struct msim_trace {
  QuadratureTrace trace;
};
struct msim_histogram {
  PhaseSpaceHistogram hist;
};
struct msim_correlation {
  CorrelationEstimate est;
};
struct msim_jumps {
  JumpStats stats;
};
struct msim_report {
  RunReport report;
  std::string text;
};

namespace {

thread_local std::string g_last_error;

msim_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return MSIM_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return MSIM_ERR_CONFIG;
    case ErrorCode::Domain: return MSIM_ERR_DOMAIN;
    case ErrorCode::Threshold: return MSIM_ERR_THRESHOLD;
    case ErrorCode::Divergence: return MSIM_ERR_DIVERGENCE;
    case ErrorCode::Fit: return MSIM_ERR_FIT;
    case ErrorCode::Calibration: return MSIM_ERR_CALIBRATION;
    case ErrorCode::Io: return MSIM_ERR_IO;
    case ErrorCode::InsufficientData: return MSIM_ERR_INSUFFICIENT_DATA;
  }
  return MSIM_ERR_INTERNAL;
}

msim_status set_error(msim_status s, const char* what) {
  g_last_error = what;
  return s;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
msim_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return MSIM_OK;
  } catch (const Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MSIM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MSIM_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MSIM_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

OscillatorParams osc(const msim_oscillator* p) {
  need(p, "oscillator");
  return OscillatorParams::make(p->resonance_angular_frequency, p->quality_factor, p->effective_mass);
}

void export_osc(const OscillatorParams& p, msim_oscillator* out) {
  out->resonance_angular_frequency = p.resonance_angular_frequency();
  out->quality_factor = p.quality_factor();
  out->effective_mass = p.effective_mass();
}

EnvironmentParams env(double temperature) {
  if (!(temperature >= 0.0)) fail(ErrorCode::Domain, "temperature must be >= 0");
  EnvironmentParams e;
  e.temperature = temperature;
  return e;
}

OpticalParams optics(const msim_optics* o) {
  need(o, "optics");
  OpticalParams p;
  p.finesse = o->finesse;
  p.wavelength = o->wavelength;
  p.cavity_length = o->cavity_length;
  p.sensitivity_floor = o->sensitivity_floor;
  validate(p);
  return p;
}

void copy_string(const std::string& s, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || capacity == 0) return;
  const size_t n = std::min(capacity - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  if (capacity < s.size() + 1) fail(ErrorCode::InvalidArgument, "buffer too small");
}

msim_diagnostics* make_diagnostics(const std::vector<Diagnostic>& diags) {
  auto* d = new msim_diagnostics;
  for (const auto& x : diags) d->messages.push_back(x.str());
  return d;
}

}  // namespace

extern "C" {

const char* msim_version(void) { return "0.1.0"; }

const char* msim_status_string(msim_status status) {
  switch (status) {
    case MSIM_OK: return "ok";
    case MSIM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MSIM_ERR_CONFIG: return "configuration error";
    case MSIM_ERR_DOMAIN: return "domain error";
    case MSIM_ERR_THRESHOLD: return "above oscillation threshold";
    case MSIM_ERR_DIVERGENCE: return "integrator diverged";
    case MSIM_ERR_FIT: return "fit failed";
    case MSIM_ERR_CALIBRATION: return "calibration error";
    case MSIM_ERR_IO: return "i/o error";
    case MSIM_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case MSIM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* msim_last_error(void) { return g_last_error.c_str(); }

// ---- model ----

void msim_oscillator_paper(msim_oscillator* out) {
  if (out) export_osc(OscillatorParams::paper(), out);
}

void msim_oscillator_scaled(msim_oscillator* out) {
  if (out) export_osc(OscillatorParams::scaled(), out);
}

msim_status msim_damping_rate(const msim_oscillator* p, double* gamma) {
  return guarded([&] {
    need(gamma, "gamma");
    *gamma = osc(p).damping_rate();
  });
}

msim_status msim_susceptibility(const msim_oscillator* p, double gain, double omega, double* re, double* im) {
  return guarded([&] {
    need(re, "re");
    need(im, "im");
    if (!(gain >= 0.0)) fail(ErrorCode::Domain, "gain must be >= 0");
    const auto chi = feedback_susceptibility(osc(p), gain, omega);
    *re = chi.real();
    *im = chi.imag();
  });
}

msim_status msim_langevin_force_psd(const msim_oscillator* p, double temperature, double* psd) {
  return guarded([&] {
    need(psd, "psd");
    *psd = langevin_force_psd(osc(p), env(temperature));
  });
}

msim_status msim_thermal_variance(const msim_oscillator* p, double temperature, double* variance) {
  return guarded([&] {
    need(variance, "variance");
    *variance = thermal_variance(osc(p), env(temperature));
  });
}

msim_status msim_effective_temperature(double temperature, double gain, double* t_eff) {
  return guarded([&] {
    need(t_eff, "t_eff");
    *t_eff = effective_temperature(temperature, gain);
  });
}

msim_status msim_effective_dampings(const msim_oscillator* p, double gain, double* gamma1, double* gamma2) {
  return guarded([&] {
    need(gamma1, "gamma1");
    need(gamma2, "gamma2");
    const auto d = effective_dampings(osc(p), gain);
    *gamma1 = d.gamma1;
    *gamma2 = d.gamma2;
  });
}

msim_status msim_parametric_variances(const msim_oscillator* p, double temperature, double gain, double* var1,
                                      double* var2) {
  return guarded([&] {
    need(var1, "var1");
    need(var2, "var2");
    const auto v = parametric_variances(osc(p), env(temperature), gain);
    *var1 = v.var1;
    *var2 = v.var2;
  });
}

msim_status msim_autocorrelation_model(double variance, double gamma_eff, double tau, double* value) {
  return guarded([&] {
    need(value, "value");
    *value = autocorrelation_model(variance, gamma_eff, tau);
  });
}

msim_status msim_saturation_amplitude(double light_power, const msim_oscillator* p, double* force,
                                      double* mean_amplitude) {
  return guarded([&] {
    const auto s = saturation_amplitude(light_power, osc(p));
    if (force) *force = s.force;
    if (mean_amplitude) *mean_amplitude = s.mean_amplitude;
  });
}

// ---- readout / demodulation ----

void msim_optics_default(msim_optics* out) {
  if (!out) return;
  const OpticalParams o;
  out->finesse = o.finesse;
  out->wavelength = o.wavelength;
  out->cavity_length = o.cavity_length;
  out->sensitivity_floor = o.sensitivity_floor;
}

msim_status msim_frequency_calibration(double delta_nu, const msim_optics* o, double* meters) {
  return guarded([&] {
    need(meters, "meters");
    *meters = frequency_calibration(delta_nu, optics(o));
  });
}

msim_status msim_volts_to_meters(double volts, const msim_optics* o, double* meters) {
  return guarded([&] {
    need(meters, "meters");
    *meters = VoltageCalibration::paper(optics(o)).volts_to_meters(volts);
  });
}

msim_status msim_meters_to_volts(double meters, const msim_optics* o, double* volts) {
  return guarded([&] {
    need(volts, "volts");
    *volts = VoltageCalibration::paper(optics(o)).meters_to_volts(meters);
  });
}

msim_status msim_noise_equivalent_displacement(double bandpass_center, double bandpass_width, double lowpass_cutoff,
                                               double delta_x_min, double* delta_x) {
  return guarded([&] {
    need(delta_x, "delta_x");
    FilterSpec spec;
    spec.bandpass_center = bandpass_center;
    spec.bandpass_width = bandpass_width;
    spec.lowpass_cutoff = lowpass_cutoff;
    *delta_x = noise_equivalent_displacement(spec, delta_x_min);
  });
}

// ---- configuration ----

msim_status msim_config_new(const char* preset, msim_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto cfg = ExperimentConfig::make_preset(preset ? preset : "paper");
    *out = new msim_config{std::move(cfg)};
  });
}

msim_status msim_config_load(const char* path, msim_config** out, msim_diagnostics** diagnostics) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    if (diagnostics) *diagnostics = nullptr;
    auto parsed = load_config(path);
    if (diagnostics) *diagnostics = make_diagnostics(parsed.diagnostics);
    *out = new msim_config{std::move(parsed.config)};
  });
}

msim_status msim_config_set(msim_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

msim_status msim_config_get(const msim_config* cfg, const char* key, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    for (const auto& [k, v] : cfg->cfg.listing())
      if (k == key) return copy_string(v, buf, capacity, needed);
    fail(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
  });
}

msim_status msim_config_validate(const msim_config* cfg, msim_diagnostics** diagnostics) {
  return guarded([&] {
    need(cfg, "config");
    need(diagnostics, "diagnostics");
    *diagnostics = nullptr;
    *diagnostics = make_diagnostics(check(cfg->cfg));
  });
}

msim_status msim_config_dump(const msim_config* cfg, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    need(cfg, "config");
    std::string s;
    for (const auto& [k, v] : cfg->cfg.listing()) s += k + " = " + v + "\n";
    if (!check(cfg->cfg).empty()) {
      copy_string(s, buf, capacity, needed);
      return;
    }
    const SimConfig sim = cfg->cfg.resolve(0);
    auto add = [&](const char* key, double v) {
      char num[32];
      const auto r = std::to_chars(num, num + sizeof num, v);
      s += std::string(key) + " = " + std::string(num, r.ptr) + "\n";
    };
    add("resolved.time_step", sim.time_step);
    add("resolved.damping_rate", sim.oscillator.damping_rate());
    if (sim.feedback.saturation_force) add("resolved.saturation_force", *sim.feedback.saturation_force);
    add("resolved.warmup", sim.warmup.value_or(default_warmup(sim)));
    copy_string(s, buf, capacity, needed);
  });
}

void msim_config_free(msim_config* cfg) { delete cfg; }

size_t msim_diagnostics_count(const msim_diagnostics* d) { return d ? d->messages.size() : 0; }

const char* msim_diagnostics_message(const msim_diagnostics* d, size_t index) {
  if (!d || index >= d->messages.size()) return nullptr;
  return d->messages[index].c_str();
}

void msim_diagnostics_free(msim_diagnostics* d) { delete d; }

// ---- traces ----

msim_status msim_simulate(const msim_config* cfg, uint64_t seed, msim_trace** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = nullptr;
    if (auto diags = check(cfg->cfg); !diags.empty()) fail(ErrorCode::Config, diags.front().str());
    *out = new msim_trace{run_experiment(cfg->cfg.resolve(seed))};
  });
}

msim_status msim_trace_from_arrays(double sample_period, const double* x1, const double* x2, size_t n,
                                   msim_trace** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    if (n > 0) {
      need(x1, "x1");
      need(x2, "x2");
    }
    if (!(sample_period > 0.0)) fail(ErrorCode::InvalidArgument, "sample period must be > 0");
    auto* t = new msim_trace;
    t->trace.sample_period = sample_period;
    t->trace.samples.resize(n);
    for (size_t k = 0; k < n; ++k) t->trace.samples[k] = {x1[k], x2[k]};
    *out = t;
  });
}

size_t msim_trace_size(const msim_trace* t) { return t ? t->trace.size() : 0; }

double msim_trace_sample_period(const msim_trace* t) { return t ? t->trace.sample_period : 0.0; }

msim_status msim_trace_copy(const msim_trace* t, double* x1, double* x2, size_t n) {
  return guarded([&] {
    need(t, "trace");
    if (n > t->trace.size()) fail(ErrorCode::InvalidArgument, "requested more samples than the trace holds");
    for (size_t k = 0; k < n; ++k) {
      if (x1) x1[k] = t->trace.samples[k].x1;
      if (x2) x2[k] = t->trace.samples[k].x2;
    }
  });
}

msim_status msim_trace_rotate(const msim_trace* t, double theta, msim_trace** out) {
  return guarded([&] {
    need(t, "trace");
    need(out, "out");
    *out = nullptr;
    *out = new msim_trace{rotate_quadratures(t->trace, theta)};
  });
}

msim_status msim_trace_write_csv(const msim_trace* t, const char* path) {
  return guarded([&] {
    need(t, "trace");
    need(path, "path");
    write_trace_csv(path, t->trace);
  });
}

void msim_trace_free(msim_trace* t) { delete t; }

// ---- analysis ----

msim_status msim_dispersions(const msim_trace* t, double* dx1, double* dx2) {
  return guarded([&] {
    need(t, "trace");
    const auto d = dispersions(t->trace);
    if (dx1) *dx1 = d.dx1;
    if (dx2) *dx2 = d.dx2;
  });
}

msim_status msim_histogram_new(const msim_trace* t, double full_scale, msim_histogram** out) {
  return guarded([&] {
    need(t, "trace");
    need(out, "out");
    *out = nullptr;
    *out = new msim_histogram{histogram(t->trace, full_scale)};
  });
}

uint64_t msim_histogram_cell(const msim_histogram* h, size_t row, size_t column) {
  constexpr auto n = PhaseSpaceHistogram::kBins;
  if (!h || row >= n || column >= n) return 0;
  return h->hist.cell(row, column);
}

uint64_t msim_histogram_total(const msim_histogram* h) { return h ? h->hist.total_count() : 0; }

uint64_t msim_histogram_overflow(const msim_histogram* h) { return h ? h->hist.overflow_count() : 0; }

double msim_histogram_cell_width(const msim_histogram* h) { return h ? h->hist.cell_width() : 0.0; }

msim_status msim_histogram_write(const msim_histogram* h, const char* path) {
  return guarded([&] {
    need(h, "histogram");
    need(path, "path");
    write_histogram(path, h->hist);
  });
}

void msim_histogram_free(msim_histogram* h) { delete h; }

msim_status msim_correlation_new(const msim_trace* t, int i, int j, double tau_max, msim_correlation** out) {
  return guarded([&] {
    need(t, "trace");
    need(out, "out");
    *out = nullptr;
    // A failed fit still leaves the correlation values usable.
    auto est = correlation_values(t->trace, i, j, tau_max);
    if (t->trace.size() < 2) fail(ErrorCode::InsufficientData, "correlation needs at least two samples");
    if (tau_max > t->trace.duration() / 10.0 * (1.0 + 1e-12))
      fail(ErrorCode::InvalidArgument, "tau_max must lie in [0, duration/10]");
    if (i == j) {
      try {
        est.fit = fit_exponential_decay(est.values, est.lag_step);
      } catch (const Error&) {
      }
    }
    *out = new msim_correlation{std::move(est)};
  });
}

size_t msim_correlation_size(const msim_correlation* c) { return c ? c->est.values.size() : 0; }

double msim_correlation_lag_step(const msim_correlation* c) { return c ? c->est.lag_step : 0.0; }

const double* msim_correlation_values(const msim_correlation* c) { return c ? c->est.values.data() : nullptr; }

msim_status msim_correlation_fit(const msim_correlation* c, double* gamma, double* variance, double* residual) {
  return guarded([&] {
    need(c, "correlation");
    if (!c->est.fit) fail(ErrorCode::Fit, "no exponential fit (cross-correlation or noise-dominated trace)");
    if (gamma) *gamma = c->est.fit->gamma;
    if (variance) *variance = c->est.fit->variance;
    if (residual) *residual = c->est.fit->residual;
  });
}

void msim_correlation_free(msim_correlation* c) { delete c; }

msim_status msim_estimate_gain(const double* estimates, size_t n, double* mean, double* spread, int* consistent) {
  return guarded([&] {
    if (n > 0) need(estimates, "estimates");
    const auto g = estimate_gain(std::span<const double>(estimates, n));
    if (mean) *mean = g.mean;
    if (spread) *spread = g.spread;
    if (consistent) *consistent = g.consistent ? 1 : 0;
  });
}

msim_status msim_detect_jumps(const msim_trace* t, double threshold, msim_jumps** out) {
  return guarded([&] {
    need(t, "trace");
    need(out, "out");
    *out = nullptr;
    *out = new msim_jumps{detect_jumps(t->trace, threshold)};
  });
}

size_t msim_jumps_count(const msim_jumps* j) { return j ? j->stats.jump_count : 0; }

size_t msim_jumps_dwell_count(const msim_jumps* j) { return j ? j->stats.dwell_times.size() : 0; }

const double* msim_jumps_dwell_times(const msim_jumps* j) { return j ? j->stats.dwell_times.data() : nullptr; }

void msim_jumps_lobe_means(const msim_jumps* j, double* positive, double* negative) {
  if (positive) *positive = j ? j->stats.positive_lobe_mean : 0.0;
  if (negative) *negative = j ? j->stats.negative_lobe_mean : 0.0;
}

void msim_jumps_free(msim_jumps* j) { delete j; }

// ---- scenarios ----

msim_status msim_run_scenario(const msim_config* cfg, const char* scenario, uint64_t seed,
                              const msim_run_options* options, msim_report** out) {
  return guarded([&] {
    need(cfg, "config");
    need(scenario, "scenario");
    need(out, "out");
    *out = nullptr;
    const auto sc = parse_scenario(scenario);
    if (!sc)
      fail(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(scenario) +
                                           "' (free, cold_damp, param_below, param_above, gain_sweep, noise_floor)");
    RunOptions opts;
    if (options) {
      if (options->has_duration) opts.duration = options->duration;
      if (options->has_gain) opts.gain = options->gain;
      if (options->output_dir) opts.output_dir = options->output_dir;
      opts.threads = options->threads;
    }
    auto* r = new msim_report{run_scenario(*sc, cfg->cfg, seed, opts), {}};
    r->text = r->report.text();
    *out = r;
  });
}

const char* msim_report_text(const msim_report* r) { return r ? r->text.c_str() : ""; }

int msim_report_passed(const msim_report* r) { return r && r->report.passed() ? 1 : 0; }

size_t msim_report_failures(const msim_report* r) { return r ? r->report.failures() : 0; }

void msim_report_free(msim_report* r) { delete r; }

}  // extern "C"
