#include "scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "analysis.hpp"
#include "error.hpp"
#include "io.hpp"

namespace mirrorsim {

namespace {

constexpr double kTwoPi = 2.0 * constants::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinSamples = 100;

std::string num(double v, int digits = 6) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v);  // counts
  else
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct Setup {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  const RunOptions& opts;

  double gain(double fallback) const {
    if (opts.gain) return *opts.gain;
    return cfg.is_explicit("feedback.gain") ? cfg.feedback.gain : fallback;
  }
  double duration(double fallback) const {
    if (opts.duration) return *opts.duration;
    return cfg.is_explicit("sim.duration") ? cfg.duration : fallback;
  }

  // Resolved simulation with the given feedback; the time step is re-derived
  // unless the configuration fixes it.
  SimConfig sim(FeedbackMode mode, double g, double dur, std::uint64_t run_seed) const {
    ExperimentConfig c = cfg;
    c.feedback.mode = mode;
    c.feedback.gain = mode == FeedbackMode::Off ? 0.0 : g;
    c.duration = dur;
    return c.resolve(run_seed);
  }
};

// Effective settings of the run, next to the configured ones.
void record_run(RunReport& r, FeedbackMode mode, double g, double dur) {
  r.parameters.emplace_back("run.feedback.mode", to_string(mode));
  r.parameters.emplace_back("run.feedback.gain", exact(g));
  r.parameters.emplace_back("run.sim.duration", exact(dur));
}

struct TraceStats {
  bool enough = false;
  double lag = 0.0;
  Dispersions disp{0.0, 0.0};
  CorrelationEstimate c11, c22, c12, c21;
  std::optional<ExponentialFit> fit1, fit2;
  std::string fit_error;
  double cross = kNaN;  // max |C12|, |C21| over lags, / (dX1 dX2)
};

TraceStats analyse(const QuadratureTrace& trace, double max_lag) {
  TraceStats s;
  s.lag = std::min(max_lag, trace.duration() / 10.0);
  s.c11 = correlation_values(trace, 1, 1, s.lag);
  s.c22 = correlation_values(trace, 2, 2, s.lag);
  s.c12 = correlation_values(trace, 1, 2, s.lag);
  s.c21 = correlation_values(trace, 2, 1, s.lag);
  s.enough = trace.size() >= kMinSamples;
  if (!s.enough) return s;
  s.disp = dispersions(trace);
  try {
    s.fit1 = fit_exponential_decay(s.c11.values, s.c11.lag_step);
    s.fit2 = fit_exponential_decay(s.c22.values, s.c22.lag_step);
  } catch (const Error& e) {
    s.fit_error = e.what();
  }
  const double norm = s.disp.dx1 * s.disp.dx2;
  if (norm > 0.0) {
    double worst = 0.0;
    for (std::size_t k = 0; k < s.c12.values.size(); ++k)
      worst = std::max({worst, std::abs(s.c12.values[k]), std::abs(s.c21.values[k])});
    s.cross = worst / norm;
  }
  return s;
}

void require_statistics(RunReport& r, const QuadratureTrace& trace, const std::string& label) {
  r.checks.push_back(Check::within(label + "samples", static_cast<double>(trace.size()), kMinSamples,
                                   kMinSamples - 0.5, std::numeric_limits<double>::infinity()));
  r.checks.back().tolerance = ">= " + std::to_string(kMinSamples);
  r.checks.back().rel_error = kNaN;
  if (trace.size() < kMinSamples) r.notes.push_back("insufficient statistics: " + label + "trace has " +
                                                    std::to_string(trace.size()) + " samples");
}

void fit_failed(RunReport& r, const TraceStats& s, const std::string& metric) {
  Check c;
  c.metric = metric;
  c.measured = kNaN;
  c.theory = kNaN;
  c.rel_error = kNaN;
  c.tolerance = "fit";
  c.status = CheckStatus::Fail;
  r.checks.push_back(c);
  r.notes.push_back(metric + ": " + s.fit_error);
}

void write_outputs(RunReport& r, const RunOptions& opts, const QuadratureTrace& trace, const TraceStats& s,
                   double full_scale) {
  if (opts.output_dir.empty()) return;
  namespace fs = std::filesystem;
  const fs::path dir(opts.output_dir);
  const auto trace_path = (dir / "trace.csv").string();
  const auto hist_path = (dir / "histogram.txt").string();
  const auto corr_path = (dir / "correlation.csv").string();
  write_trace_csv(trace_path, trace);
  write_histogram(hist_path, histogram(trace, full_scale));
  write_correlations(corr_path, s.c11, s.c22, s.c12, s.c21);
  r.files.insert(r.files.end(), {trace_path, hist_path, corr_path});
}

void add_cross_check(RunReport& r, const TraceStats& s, const std::string& prefix = "") {
  r.checks.push_back(Check::within(prefix + "cross_correlation_max", s.cross, 0.0, -1.0, 0.05));
  r.checks.back().tolerance = "< 0.05";
  r.checks.back().rel_error = kNaN;
}

// --- scenarios ---------------------------------------------------------------

QuadratureTrace run_free(RunReport& r, const Setup& su, double dur, TraceStats& stats) {
  const SimConfig sim = su.sim(FeedbackMode::Off, 0.0, dur, su.seed);
  auto trace = run_experiment(sim);
  stats = analyse(trace, su.cfg.correlation_max_lag);
  require_statistics(r, trace, "");
  return trace;
}

void free_checks(RunReport& r, const SimConfig& sim, const TraceStats& s) {
  const double dx_th = std::sqrt(thermal_variance(sim.oscillator, sim.environment));
  const double gamma = sim.oscillator.damping_rate();
  r.checks.push_back(Check::relative("dispersion_x1_m", s.disp.dx1, dx_th, 0.05));
  r.checks.push_back(Check::relative("dispersion_x2_m", s.disp.dx2, dx_th, 0.05));
  add_cross_check(r, s);
  if (s.fit1 && s.fit2) {
    r.checks.push_back(Check::relative("damping_fit_hz", 0.5 * (s.fit1->gamma + s.fit2->gamma) / kTwoPi,
                                       gamma / kTwoPi, 0.05));
    r.checks.push_back(Check::info("damping_fit_x1_hz", s.fit1->gamma / kTwoPi, gamma / kTwoPi));
    r.checks.push_back(Check::info("damping_fit_x2_hz", s.fit2->gamma / kTwoPi, gamma / kTwoPi));
  } else {
    fit_failed(r, s, "damping_fit_hz");
  }
}

void calibration_checks(RunReport& r, const ExperimentConfig& cfg) {
  const double dx200 = frequency_calibration(200.0, cfg.optics);
  r.checks.push_back(Check::relative("calibration_200hz_m", dx200, 5.4e-16, 0.01));
  const auto cal = VoltageCalibration::paper(cfg.optics);
  const double v = 0.027;
  const double round_trip = cal.meters_to_volts(cal.volts_to_meters(v));
  r.checks.push_back(Check::relative("calibration_round_trip_v", round_trip, v, 1e-12));
  const PhaseSpaceHistogram h(cfg.histogram_full_scale);
  r.checks.push_back(Check::info("histogram_cell_width_m", h.cell_width(), 2.0 * cfg.histogram_full_scale / 256.0));
}

void scenario_free(RunReport& r, const Setup& su) {
  TraceStats s;
  const double dur = su.duration(60.0);
  record_run(r, FeedbackMode::Off, 0.0, dur);
  const auto trace = run_free(r, su, dur, s);
  const SimConfig sim = su.sim(FeedbackMode::Off, 0.0, dur, su.seed);
  if (s.enough) {
    free_checks(r, sim, s);
    const auto w = histogram(trace, su.cfg.histogram_full_scale).widths();
    r.checks.push_back(Check::info("histogram_width_ratio", w.x2 / w.x1, 1.0));
  }
  calibration_checks(r, su.cfg);
  write_outputs(r, su.opts, trace, s, su.cfg.histogram_full_scale);
}

void scenario_cold_damp(RunReport& r, const Setup& su) {
  const double g = su.gain(3.0);
  const double dur = su.duration(60.0);
  record_run(r, FeedbackMode::ColdDamp, g, dur);
  TraceStats free_stats;
  run_free(r, su, dur, free_stats);
  const SimConfig sim = su.sim(FeedbackMode::ColdDamp, g, dur, su.seed);
  const auto trace = run_experiment(sim);
  const auto s = analyse(trace, su.cfg.correlation_max_lag);
  if (free_stats.enough && s.enough) {
    const double v_th = thermal_variance(sim.oscillator, sim.environment);
    const double gamma = sim.oscillator.damping_rate();
    const double ratio_th = 1.0 / (1.0 + g);
    r.checks.push_back(Check::relative("variance_ratio_x1", std::pow(s.disp.dx1 / free_stats.disp.dx1, 2), ratio_th, 0.10));
    r.checks.push_back(Check::relative("variance_ratio_x2", std::pow(s.disp.dx2 / free_stats.disp.dx2, 2), ratio_th, 0.10));
    const double var = 0.5 * (s.disp.dx1 * s.disp.dx1 + s.disp.dx2 * s.disp.dx2);
    r.checks.push_back(Check::relative("effective_temperature_k", sim.environment.temperature * var / v_th,
                                       effective_temperature(sim.environment.temperature, g), 0.10));
    if (s.fit1 && s.fit2)
      r.checks.push_back(Check::relative("effective_width_hz", 0.5 * (s.fit1->gamma + s.fit2->gamma) / kTwoPi,
                                         (1.0 + g) * gamma / kTwoPi, 0.07));
    else
      fit_failed(r, s, "effective_width_hz");
    add_cross_check(r, s);
  }
  write_outputs(r, su.opts, trace, s, su.cfg.histogram_full_scale);
}

struct ParamResult {
  double g = 0.0;
  QuadratureTrace trace;
  TraceStats stats;
};

ParamResult run_parametric(const Setup& su, FeedbackMode mode, double g, double dur, std::uint64_t run_seed) {
  ParamResult out;
  out.g = g;
  const SimConfig sim = su.sim(mode, g, dur, run_seed);
  out.trace = run_experiment(sim);
  // Spring modulation squeezes the diagonals; bring them back onto the axes.
  const auto& analysed =
      mode == FeedbackMode::ParametricSpring ? rotate_quadratures(out.trace, -constants::pi / 4.0) : out.trace;
  out.stats = analyse(analysed, su.cfg.correlation_max_lag);
  return out;
}

FeedbackMode parametric_mode(const ExperimentConfig& cfg) {
  return cfg.feedback.mode == FeedbackMode::ParametricSpring ? FeedbackMode::ParametricSpring
                                                             : FeedbackMode::ParametricViscous;
}

void scenario_param_below(RunReport& r, const Setup& su) {
  const double g = su.gain(0.8);
  if (!(g >= 0.0 && g < 1.0)) fail(ErrorCode::Threshold, "param_below needs 0 <= g < 1, got " + num(g));
  const double dur = su.duration(300.0);
  const auto mode = parametric_mode(su.cfg);
  record_run(r, mode, g, dur);
  if (mode == FeedbackMode::ParametricSpring)
    r.notes.push_back("spring modulation: quadratures analysed after a -pi/4 rotation");
  const auto res = run_parametric(su, mode, g, dur, su.seed);
  const auto& s = res.stats;
  require_statistics(r, res.trace, "");
  const SimConfig sim = su.sim(mode, g, dur, su.seed);
  if (s.enough) {
    const double v_th = thermal_variance(sim.oscillator, sim.environment);
    const double gamma = sim.oscillator.damping_rate();
    const auto v = parametric_variances(sim.oscillator, sim.environment, g);
    const auto d = effective_dampings(sim.oscillator, g);
    r.checks.push_back(Check::relative("dispersion_ratio_x1", s.disp.dx1 / std::sqrt(v_th), std::sqrt(v.var1 / v_th), 0.08));
    r.checks.push_back(Check::relative("dispersion_ratio_x2", s.disp.dx2 / std::sqrt(v_th), std::sqrt(v.var2 / v_th), 0.10));
    r.checks.push_back(Check::info("dispersion_x1_m", s.disp.dx1, std::sqrt(v.var1)));
    r.checks.push_back(Check::info("dispersion_x2_m", s.disp.dx2, std::sqrt(v.var2)));
    if (s.fit1 && s.fit2) {
      r.checks.push_back(Check::relative("damping_x1_over_gamma", s.fit1->gamma / gamma, d.gamma1 / gamma, 0.10));
      r.checks.push_back(Check::relative("damping_x2_over_gamma", s.fit2->gamma / gamma, d.gamma2 / gamma, 0.10));
      if (g > 0.0) {
        GainObservations obs{gamma, v_th, s.fit1->gamma, s.fit2->gamma, s.disp.dx1 * s.disp.dx1,
                             s.disp.dx2 * s.disp.dx2};
        const auto est = estimate_gain(obs);
        r.checks.push_back(Check::relative("gain_estimate", est.mean, g, 0.10));
        r.checks.push_back(Check::within("gain_estimate_spread", est.spread, 0.0, -1.0, 0.2));
        r.checks.back().tolerance = "<= 0.2";
        r.checks.back().rel_error = kNaN;
      }
    } else {
      fit_failed(r, s, "damping_fit");
    }
    add_cross_check(r, s);
  }
  write_outputs(r, su.opts, res.trace, s, su.cfg.histogram_full_scale);
}

void scenario_param_above(RunReport& r, const Setup& su) {
  const double g = su.gain(3.0);
  if (!(g > 1.0)) fail(ErrorCode::Config, "param_above needs g > 1, got " + num(g));
  const double dur = su.duration(60.0);
  ExperimentConfig cfg = su.cfg;
  if (!cfg.feedback.saturation_force && !cfg.light_power) {
    cfg.light_power = 0.5;
    r.notes.push_back("saturation from a 0.5 W feedback beam");
  }
  const Setup local{cfg, su.seed, su.opts};
  const auto mode = parametric_mode(cfg);
  record_run(r, mode, g, dur);
  const SimConfig sim = local.sim(mode, g, dur, su.seed);
  const double fmax = *sim.feedback.saturation_force;
  const auto& p = sim.oscillator;
  const double amplitude = fmax / (p.effective_mass() * p.damping_rate() * p.resonance_angular_frequency());
  const double threshold = 0.5 * amplitude;
  const double v_th = thermal_variance(p, sim.environment);
  // Widened when needed so the oscillation lobes stay on the map.
  const double full_scale = std::max(cfg.histogram_full_scale, 4.0 / 3.0 * amplitude);
  if (full_scale != cfg.histogram_full_scale) r.notes.push_back("histogram full scale widened to " + num(full_scale));
  const double theta = mode == FeedbackMode::ParametricSpring ? -constants::pi / 4.0 : 0.0;

  // Main run.
  auto trace = run_experiment(sim);
  const auto analysed = theta != 0.0 ? rotate_quadratures(trace, theta) : trace;
  const auto s = analyse(analysed, cfg.correlation_max_lag);
  require_statistics(r, trace, "");
  if (s.enough) {
    const auto jumps = detect_jumps(analysed, threshold);
    const double t_total = jumps.positive_time + jumps.negative_time;
    const double lobe = t_total > 0.0 ? (jumps.positive_time * jumps.positive_lobe_mean -
                                         jumps.negative_time * jumps.negative_lobe_mean) /
                                            t_total
                                      : 0.0;
    r.checks.push_back(Check::relative("lobe_mean_x2_m", lobe, amplitude, 0.15));
    r.checks.push_back(Check::info("lobe_mean_paper_ratio", lobe / 6e-15, 1.0));
    if (g >= 2.0) {
      r.checks.push_back(Check::within("jump_count", static_cast<double>(jumps.jump_count), 0.0, -0.5, 0.5));
      r.checks.back().tolerance = "= 0";
      r.checks.back().rel_error = kNaN;
    } else {
      r.checks.push_back(Check::info("jump_count", static_cast<double>(jumps.jump_count), kNaN));
    }
    r.checks.push_back(Check::info("variance_ratio_x1", s.disp.dx1 * s.disp.dx1 / v_th, kNaN));
  }

  // Ensemble started at the origin: both lobes must be populated.
  const std::size_t n_ens = cfg.ensemble_size;
  std::vector<QuadratureTrace> ensemble(n_ens);
  parallel_for(n_ens, su.opts.threads, [&](std::size_t k) {
    SimConfig e = local.sim(mode, g, dur, mix_seed(su.seed, 100 + k));
    e.initial_x1 = e.initial_x2 = 0.0;
    ensemble[k] = run_experiment(e);
    if (theta != 0.0) ensemble[k] = rotate_quadratures(ensemble[k], theta);
  });
  PhaseSpaceHistogram merged(full_scale);
  std::size_t positive = 0;
  for (const auto& t : ensemble) {
    merged.accumulate(t);
    double mean = 0.0;
    for (const auto& q : t.samples) mean += q.x2;
    if (mean > 0.0) ++positive;
  }
  const double frac = n_ens ? static_cast<double>(std::min(positive, n_ens - positive)) / static_cast<double>(n_ens) : 0.0;
  r.checks.push_back(Check::within("ensemble_minority_lobe_fraction", frac, 0.5, 0.2, 0.5 + 1e-12));
  r.checks.back().tolerance = ">= 0.2";
  {
    const auto m = merged.marginal_x2();
    const std::size_t centre = PhaseSpaceHistogram::kBins / 2;
    std::uint64_t peak_lo = 0, peak_hi = 0;
    for (std::size_t k = 0; k < centre; ++k) peak_lo = std::max(peak_lo, m[k]);
    for (std::size_t k = centre; k < m.size(); ++k) peak_hi = std::max(peak_hi, m[k]);
    const double centre_count = 0.5 * static_cast<double>(m[centre - 1] + m[centre]);
    const double peak = static_cast<double>(std::min(peak_lo, peak_hi));
    const double dip = peak > 0.0 ? centre_count / peak : 1.0;
    r.checks.push_back(Check::within("ensemble_centre_to_peak", dip, 0.0, -1.0, 0.5));
    r.checks.back().tolerance = "< 0.5";
    r.checks.back().rel_error = kNaN;
  }
  if (!su.opts.output_dir.empty()) {
    const auto path = (std::filesystem::path(su.opts.output_dir) / "ensemble_histogram.txt").string();
    write_histogram(path, merged);
    r.files.push_back(path);
  }

  // Just above threshold: squeezed X1 and frequent jumps.
  {
    const double g_near = 1.05;
    const double near_dur = std::max(600.0, dur);
    SimConfig near = local.sim(mode, g_near, near_dur, mix_seed(su.seed, 99));
    auto t = run_experiment(near);
    if (theta != 0.0) t = rotate_quadratures(t, theta);
    const auto d = dispersions(t);
    const auto jumps = detect_jumps(t, threshold);
    r.checks.push_back(Check::within("near_threshold_variance_ratio_x1", d.dx1 * d.dx1 / v_th, 0.55, -1.0, 0.7));
    r.checks.back().tolerance = "< 0.7";
    r.checks.push_back(Check::within("near_threshold_jump_count", static_cast<double>(jumps.jump_count), kNaN,
                                     0.5, std::numeric_limits<double>::infinity()));
    r.checks.back().tolerance = ">= 1";
    r.checks.back().rel_error = kNaN;
    r.notes.push_back("near-threshold run: g = " + num(g_near) + ", " + num(near_dur) + " s");
  }
  write_outputs(r, su.opts, trace, s, full_scale);
}

void scenario_gain_sweep(RunReport& r, const Setup& su) {
  const auto& gains = su.cfg.gain_list;
  for (double g : gains)
    if (!(g >= 0.0 && g < 1.0)) fail(ErrorCode::Threshold, "gain sweep values must lie in [0, 1), got " + num(g));
  const double dur = su.duration(600.0);
  const auto mode = parametric_mode(su.cfg);
  r.parameters.emplace_back("run.feedback.mode", to_string(mode));
  r.parameters.emplace_back("run.sim.duration", exact(dur));
  std::vector<ParamResult> results(gains.size());
  parallel_for(gains.size(), su.opts.threads, [&](std::size_t i) {
    results[i] = run_parametric(su, mode, gains[i], dur, mix_seed(su.seed, 200 + i));
  });

  const SimConfig ref = su.sim(FeedbackMode::Off, 0.0, dur, su.seed);
  const double v_th = thermal_variance(ref.oscillator, ref.environment);
  const double gamma = ref.oscillator.damping_rate();
  std::ostringstream table;
  table << "gain,gamma1_norm,gamma1_theory,gamma2_norm,gamma2_theory,var1_norm,var1_theory,var2_norm,var2_theory\n";
  for (const auto& res : results) {
    const auto& s = res.stats;
    const std::string tag = "g" + num(res.g, 3) + "_";
    require_statistics(r, res.trace, tag);
    if (!s.enough) continue;
    const auto d = effective_dampings(ref.oscillator, res.g);
    const auto v = parametric_variances(ref.oscillator, ref.environment, res.g);
    const double var1 = s.disp.dx1 * s.disp.dx1 / v_th;
    const double var2 = s.disp.dx2 * s.disp.dx2 / v_th;
    r.checks.push_back(Check::relative(tag + "var1_norm", var1, v.var1 / v_th, 0.10));
    r.checks.push_back(Check::relative(tag + "var2_norm", var2, v.var2 / v_th, 0.10));
    double g1 = kNaN, g2 = kNaN;
    if (s.fit1 && s.fit2) {
      g1 = s.fit1->gamma / gamma;
      g2 = s.fit2->gamma / gamma;
      r.checks.push_back(Check::relative(tag + "gamma1_norm", g1, d.gamma1 / gamma, 0.10));
      r.checks.push_back(Check::relative(tag + "gamma2_norm", g2, d.gamma2 / gamma, 0.10));
      if (res.g >= 0.5) {
        GainObservations obs{gamma, v_th, s.fit1->gamma, s.fit2->gamma, s.disp.dx1 * s.disp.dx1,
                             s.disp.dx2 * s.disp.dx2};
        r.checks.push_back(Check::relative(tag + "gain_estimate", estimate_gain(obs).mean, res.g, 0.10));
      }
    } else {
      fit_failed(r, s, tag + "damping_fit");
    }
    if (std::abs(res.g - 0.9) < 1e-12) {
      r.checks.push_back(Check::within(tag + "var1_norm_limit", var1, v.var1 / v_th, 0.5, 0.6));
      r.checks.back().tolerance = "(0.5, 0.6)";
    }
    table << num(res.g, 6) << ',' << num(g1, 8) << ',' << num(d.gamma1 / gamma, 8) << ',' << num(g2, 8) << ','
          << num(d.gamma2 / gamma, 8) << ',' << num(var1, 8) << ',' << num(v.var1 / v_th, 8) << ','
          << num(var2, 8) << ',' << num(v.var2 / v_th, 8) << '\n';
  }
  if (!results.empty()) write_outputs(r, su.opts, results.back().trace, results.back().stats, su.cfg.histogram_full_scale);
  if (!su.opts.output_dir.empty()) {
    const auto path = (std::filesystem::path(su.opts.output_dir) / "sweep.csv").string();
    write_text(path, table.str());
    r.files.push_back(path);
  }
}

void scenario_noise_floor(RunReport& r, const Setup& su) {
  const auto& cfg = su.cfg;
  const FilterSpec spec = cfg.filter();
  validate(spec);
  validate(cfg.optics);
  const double dt = chain_sample_period(spec);
  const double dur = su.duration(2.0);
  r.parameters.emplace_back("run.sim.duration", exact(dur));

  DemodConfig dc;
  dc.reference_frequency = spec.bandpass_center;
  dc.gain_correction = calibrate_gain(spec, dc, dt);
  dc.meters_per_radian = 1.0 / cfg.optics.phase_gain();
  const double min_period = 1.0 / (4.0 * spec.lowpass_cutoff);
  const auto decim = static_cast<std::size_t>(std::max(1.0, std::round(std::max(cfg.output_sample_period, min_period) / dt)));
  dc.output_sample_period = static_cast<double>(decim) * dt;
  Demodulator demod(spec, dc, dt);
  PhaseReadout readout(cfg.optics, dt, true, mix_seed(su.seed, 1));

  const double settle = 30.0 / (kTwoPi * spec.lowpass_cutoff) + 30.0 / (constants::pi * spec.bandpass_width);
  const auto settle_outputs = static_cast<std::size_t>(std::ceil(settle / dc.output_sample_period));
  const auto n_out = static_cast<std::size_t>(std::floor(dur / dc.output_sample_period + 1e-9));
  QuadratureTrace trace;
  trace.sample_period = dc.output_sample_period;
  trace.origin = TraceOrigin::DemodulatedReadout;
  trace.seed = su.seed;
  trace.samples.reserve(n_out);
  std::size_t produced = 0;
  while (trace.samples.size() < n_out)
    if (demod.push(readout(0.0)) && produced++ >= settle_outputs) trace.samples.push_back(demod.output());

  const auto s = analyse(trace, cfg.correlation_max_lag);
  require_statistics(r, trace, "");
  if (s.enough) {
    double q = 0.0;
    for (const auto& p : trace.samples) q += p.x1 * p.x1 + p.x2 * p.x2;
    const double measured = std::sqrt(q / (2.0 * static_cast<double>(trace.size())));
    const double predicted = noise_equivalent_displacement(spec, cfg.optics.sensitivity_floor);
    r.checks.push_back(Check::relative("noise_floor_vs_bandwidth_m", measured, predicted, 0.05));
    r.checks.push_back(Check::within("noise_floor_vs_paper_ratio", measured / 1.65e-17, 1.0, 0.5, 2.5));
    r.checks.back().tolerance = "[0.5, 2.5]";
    r.checks.push_back(Check::info("noise_bandwidth_hz", predicted * predicted /
                                                             (cfg.optics.sensitivity_floor * cfg.optics.sensitivity_floor),
                                   kNaN));
    r.checks.push_back(Check::info("noise_floor_volts", VoltageCalibration::paper(cfg.optics).meters_to_volts(measured),
                                   0.86e-3));
  }
  write_outputs(r, su.opts, trace, s, cfg.histogram_full_scale);
}

}  // namespace

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "free") return Scenario::Free;
  if (name == "cold_damp") return Scenario::ColdDamp;
  if (name == "param_below") return Scenario::ParamBelow;
  if (name == "param_above") return Scenario::ParamAbove;
  if (name == "gain_sweep") return Scenario::GainSweep;
  if (name == "noise_floor") return Scenario::NoiseFloor;
  return std::nullopt;
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Free: return "free";
    case Scenario::ColdDamp: return "cold_damp";
    case Scenario::ParamBelow: return "param_below";
    case Scenario::ParamAbove: return "param_above";
    case Scenario::GainSweep: return "gain_sweep";
    case Scenario::NoiseFloor: return "noise_floor";
  }
  return "?";
}

Check Check::relative(std::string metric, double measured, double theory, double tol) {
  Check c;
  c.metric = std::move(metric);
  c.measured = measured;
  c.theory = theory;
  c.rel_error = theory != 0.0 ? measured / theory - 1.0 : kNaN;
  c.tolerance = num(tol, 3);
  const double err = theory != 0.0 ? std::abs(c.rel_error) : std::abs(measured);
  c.status = std::isfinite(err) && err <= tol ? CheckStatus::Pass : CheckStatus::Fail;
  return c;
}

Check Check::within(std::string metric, double measured, double theory, double lo, double hi) {
  Check c;
  c.metric = std::move(metric);
  c.measured = measured;
  c.theory = theory;
  c.rel_error = std::isfinite(theory) && theory != 0.0 ? measured / theory - 1.0 : kNaN;
  c.tolerance = "(" + num(lo, 3) + ", " + num(hi, 3) + ")";
  c.status = measured > lo && measured < hi ? CheckStatus::Pass : CheckStatus::Fail;
  return c;
}

Check Check::info(std::string metric, double measured, double theory) {
  Check c;
  c.metric = std::move(metric);
  c.measured = measured;
  c.theory = theory;
  c.rel_error = std::isfinite(theory) && theory != 0.0 ? measured / theory - 1.0 : kNaN;
  c.tolerance = "-";
  c.status = CheckStatus::Info;
  return c;
}

std::string Check::line() const {
  const char* st = status == CheckStatus::Pass ? "PASS" : status == CheckStatus::Fail ? "FAIL" : "INFO";
  return metric + " = " + num(measured) + " | " + num(theory) + " | " + num(rel_error, 3) + " | " + tolerance +
         " | " + st;
}

bool RunReport::passed() const { return failures() == 0; }

std::size_t RunReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const Check& c) { return c.status == CheckStatus::Fail; }));
}

std::string RunReport::text() const {
  std::ostringstream os;
  os << "# scenario = " << to_string(scenario) << "\n# seed = " << seed << "\n# wall_clock_s = " << num(wall_seconds, 4)
     << '\n';
  for (const auto& [k, v] : parameters) os << "# param " << k << " = " << v << '\n';
  for (const auto& n : notes) os << "# note: " << n << '\n';
  os << "# metric = measured | theory | rel_error | tolerance | status\n";
  for (const auto& c : checks) os << c.line() << '\n';
  os << "# result = " << (passed() ? "PASS" : "FAIL") << " (" << checks.size() << " lines, " << failures()
     << " failed)\n";
  return os.str();
}

RunReport run_scenario(Scenario scenario, const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& options) {
  if (auto diags = check(cfg); !diags.empty()) fail(ErrorCode::Config, diags.front().str());
  const auto start = std::chrono::steady_clock::now();
  if (!options.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.output_dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory '" + options.output_dir + "': " + ec.message());
  }
  RunReport r;
  r.scenario = scenario;
  r.seed = seed;
  r.parameters = cfg.listing();
  const Setup su{cfg, seed, options};
  switch (scenario) {
    case Scenario::Free: scenario_free(r, su); break;
    case Scenario::ColdDamp: scenario_cold_damp(r, su); break;
    case Scenario::ParamBelow: scenario_param_below(r, su); break;
    case Scenario::ParamAbove: scenario_param_above(r, su); break;
    case Scenario::GainSweep: scenario_gain_sweep(r, su); break;
    case Scenario::NoiseFloor: scenario_noise_floor(r, su); break;
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!options.output_dir.empty()) {
    const auto path = (std::filesystem::path(options.output_dir) / "report.txt").string();
    r.files.push_back(path);
    write_text(path, r.text());
  }
  return r;
}

}  // namespace mirrorsim
