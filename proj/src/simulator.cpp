#include "simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "error.hpp"

namespace mirrorsim {

namespace {

constexpr double kTwoPi = 2.0 * constants::pi;
constexpr double kSlack = 1e-9;

double fastest_damping(const SimConfig& cfg) {
  const double gamma = cfg.oscillator.damping_rate();
  if (cfg.feedback.mode == FeedbackMode::Off) return gamma;
  return gamma * (1.0 + cfg.feedback.gain);
}

[[noreturn]] void diverged(std::uint64_t step, double time) {
  std::ostringstream os;
  os << "integrator diverged at step " << step << " (t = " << time << " s)";
  fail(ErrorCode::Divergence, os.str());
}

std::uint64_t substeps(double output_period, double dt) {
  return static_cast<std::uint64_t>(std::max(1.0, std::ceil(output_period / dt - kSlack)));
}

std::size_t sample_count(const SimConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.duration / cfg.output_sample_period + kSlack));
}

}  // namespace

double max_time_step(const SimConfig& cfg) {
  if (cfg.integrator == Integrator::FullBand)
    return kTwoPi / (20.0 * cfg.oscillator.resonance_angular_frequency());
  return 1.0 / (20.0 * fastest_damping(cfg));
}

void validate(const SimConfig& cfg) {
  validate(cfg.feedback);
  if (!(cfg.environment.temperature >= 0.0))
    fail(ErrorCode::Config, "EnvironmentParams: temperature must be >= 0");
  if (!(cfg.time_step > 0.0)) fail(ErrorCode::Config, "SimConfig: time_step must be > 0");
  if (!(cfg.output_sample_period >= cfg.time_step * (1.0 - kSlack)))
    fail(ErrorCode::Config, "SimConfig: output_sample_period must be >= time_step");
  if (!(cfg.duration >= cfg.output_sample_period * (1.0 - kSlack)))
    fail(ErrorCode::Config, "SimConfig: duration must be >= output_sample_period");
  const double bound = max_time_step(cfg);
  if (cfg.time_step > bound * (1.0 + kSlack)) {
    std::ostringstream os;
    if (cfg.integrator == Integrator::FullBand)
      os << "SimConfig: time_step " << cfg.time_step << " s exceeds the full-band stability bound 2pi/(20 Omega_M) = "
         << bound << " s";
    else
      os << "SimConfig: time_step " << cfg.time_step
         << " s exceeds the rotating-frame bound 1/(20 Gamma (1+g)) = " << bound << " s";
    fail(ErrorCode::Config, os.str());
  }
  if (cfg.warmup && !(*cfg.warmup >= 0.0)) fail(ErrorCode::Config, "SimConfig: warmup must be >= 0");
  if (cfg.integrator == Integrator::FullBand) {
    validate(cfg.optics);
    FilterSpec spec = cfg.filter;
    spec.bandpass_center = cfg.oscillator.resonance_angular_frequency();
    validate(spec);
    if (cfg.output_sample_period < 1.0 / (4.0 * cfg.filter.lowpass_cutoff) * (1.0 - kSlack))
      fail(ErrorCode::Config, "SimConfig: output_sample_period must be >= 1/(4 lowpass_cutoff)");
  }
}

double default_warmup(const SimConfig& cfg) {
  const double gamma = cfg.oscillator.damping_rate();
  const double g = cfg.feedback.gain;
  double slowest = gamma;
  switch (cfg.feedback.mode) {
    case FeedbackMode::Off:
      break;
    case FeedbackMode::ColdDamp:
      slowest = gamma * (1.0 + g);
      break;
    case FeedbackMode::ParametricViscous:
    case FeedbackMode::ParametricSpring: {
      const double amplified = std::abs(gamma * (1.0 - g));
      slowest = amplified > 0.0 ? std::min(gamma * (1.0 + g), amplified) : gamma;
      break;
    }
  }
  double warm = 10.0 / slowest;
  if (cfg.integrator == Integrator::FullBand)
    warm += 30.0 / (kTwoPi * cfg.filter.lowpass_cutoff) + 30.0 / (constants::pi * cfg.filter.bandpass_width);
  return warm;
}

double generate_langevin_increment(Rng& rng, const OscillatorParams& p, const EnvironmentParams& e,
                                   double dt) {
  const double variance = langevin_force_psd(p, e) * dt;
  if (variance == 0.0) return 0.0;
  return std::sqrt(variance) * rng.gaussian();
}

double feedback_force(const FullBandState& s, const SimConfig& cfg, double t) {
  const auto& fb = cfg.feedback;
  const auto& p = cfg.oscillator;
  const double m_gamma = p.effective_mass() * p.damping_rate();
  double force = 0.0;
  switch (fb.mode) {
    case FeedbackMode::Off:
      return 0.0;
    case FeedbackMode::ColdDamp:
      force = -fb.gain * m_gamma * s.velocity;
      break;
    case FeedbackMode::ParametricViscous:
      force = 2.0 * fb.gain * m_gamma *
              std::cos(2.0 * p.resonance_angular_frequency() * t + fb.modulation_phase) * s.velocity;
      break;
    case FeedbackMode::ParametricSpring:
      force = 2.0 * fb.gain * m_gamma * p.resonance_angular_frequency() *
              std::cos(2.0 * p.resonance_angular_frequency() * t + fb.modulation_phase) * s.position;
      break;
  }
  if (fb.saturation_force) force = std::clamp(force, -*fb.saturation_force, *fb.saturation_force);
  return force;
}

ForceQuadratures feedback_force_quadratures(const RotatingState& s, const SimConfig& cfg) {
  const auto& fb = cfg.feedback;
  const auto& p = cfg.oscillator;
  const double scale = fb.gain * p.effective_mass() * p.damping_rate() * p.resonance_angular_frequency();
  const double c = std::cos(fb.modulation_phase);
  const double sn = std::sin(fb.modulation_phase);
  ForceQuadratures f;
  switch (fb.mode) {
    case FeedbackMode::Off:
      return f;
    case FeedbackMode::ColdDamp:
      f.f1 = -scale * s.x2;
      f.f2 = scale * s.x1;
      break;
    case FeedbackMode::ParametricViscous:
      f.f1 = scale * (sn * s.x1 + c * s.x2);
      f.f2 = scale * (c * s.x1 - sn * s.x2);
      break;
    case FeedbackMode::ParametricSpring:
      f.f1 = scale * (c * s.x1 - sn * s.x2);
      f.f2 = -scale * (sn * s.x1 + c * s.x2);
      break;
  }
  if (fb.saturation_force) {
    const double amplitude = std::hypot(f.f1, f.f2);
    if (amplitude > *fb.saturation_force) {
      const double r = *fb.saturation_force / amplitude;
      f.f1 *= r;
      f.f2 *= r;
      f.saturated = true;
    }
  }
  return f;
}

// --- full band -------------------------------------------------------------

namespace {

// Kick-drift rings at w' with cos(w' dt) = 1 - k dt^2 / 2; pick k so that
// w' = Omega_M. Past the stability limit Omega dt = 2 keep k = Omega^2 so the
// run still blows up instead of aliasing quietly.
double stiffness(double omega, double dt) {
  if (omega * dt >= 2.0) return omega * omega;
  return std::pow(2.0 * std::sin(0.5 * omega * dt) / dt, 2);
}

}  // namespace

FullBandIntegrator::FullBandIntegrator(const SimConfig& cfg, double dt)
    : cfg_(cfg),
      dt_(dt),
      omega2_(stiffness(cfg.oscillator.resonance_angular_frequency(), dt)),
      gamma_(cfg.oscillator.damping_rate()),
      inv_mass_(1.0 / cfg.oscillator.effective_mass()),
      impulse_sigma_(std::sqrt(langevin_force_psd(cfg.oscillator, cfg.environment) * dt)) {}

double FullBandIntegrator::step(FullBandState& s, Rng& rng) {
  // Kick-drift keeps the velocity half a step behind the position; a pump that
  // multiplies the velocity has to be read at that time or the squeezed axis
  // tilts by Omega dt / 2.
  const bool on_velocity = cfg_.feedback.mode == FeedbackMode::ParametricViscous;
  const double force = feedback_force(s, cfg_, on_velocity ? s.time - 0.5 * dt_ : s.time);
  const double accel = -omega2_ * s.position - gamma_ * s.velocity + force * inv_mass_;
  double v = s.velocity + accel * dt_;
  const double impulse = impulse_sigma_ > 0.0 ? impulse_sigma_ * rng.gaussian() : 0.0;
  v += impulse * inv_mass_;
  s.velocity = v;
  s.position += v * dt_;
  ++s.step;
  s.time = static_cast<double>(s.step) * dt_;
  if (!std::isfinite(s.position) || !std::isfinite(s.velocity)) diverged(s.step, s.time);
  return impulse;
}

FullBandState step_full_band(const FullBandState& state, const SimConfig& cfg, Rng& rng) {
  if (cfg.integrator != Integrator::FullBand)
    fail(ErrorCode::Config, "step_full_band called with a rotating-frame configuration");
  if (cfg.time_step > max_time_step(cfg) * (1.0 + kSlack))
    fail(ErrorCode::Config, "SimConfig: time_step exceeds the full-band stability bound");
  FullBandIntegrator integ(cfg, cfg.time_step);
  FullBandState next = state;
  integ.step(next, rng);
  return next;
}

// --- rotating frame --------------------------------------------------------

RotatingIntegrator::RotatingIntegrator(const SimConfig& cfg, double dt)
    : cfg_(cfg), dt_(dt), k11_(0.0), k12_(0.0), k21_(0.0), k22_(0.0) {
  const auto& p = cfg.oscillator;
  const auto& fb = cfg.feedback;
  gamma_ = p.damping_rate();
  force_scale_ = fb.gain * p.effective_mass() * gamma_ * p.resonance_angular_frequency();
  drive_scale_ = 1.0 / (2.0 * p.effective_mass() * p.resonance_angular_frequency());
  sigma_ = std::sqrt(gamma_ * thermal_variance(p, cfg.environment));
  has_feedback_ = fb.mode != FeedbackMode::Off && fb.gain > 0.0;
  fmax_ = fb.saturation_force;

  const double c = std::cos(fb.modulation_phase);
  const double s = std::sin(fb.modulation_phase);
  switch (fb.mode) {
    case FeedbackMode::Off:
      break;
    case FeedbackMode::ColdDamp:
      k12_ = -1.0;
      k21_ = 1.0;
      break;
    case FeedbackMode::ParametricViscous:
      k11_ = s, k12_ = c, k21_ = c, k22_ = -s;
      break;
    case FeedbackMode::ParametricSpring:
      k11_ = c, k12_ = -s, k21_ = -s, k22_ = -c;
      break;
  }

  // Linear drift: -Gamma/2 X + (g Gamma / 2) B X with B = [[-k21, -k22], [k11, k12]],
  // symmetric for every feedback mode.
  const double half_gain = 0.5 * fb.gain * gamma_;
  const double a = -k21_, b = -k22_, d = k12_;
  const double theta = 0.5 * std::atan2(2.0 * b, a - d);
  basis_c_ = std::cos(theta);
  basis_s_ = std::sin(theta);
  const double cc = basis_c_ * basis_c_, ss = basis_s_ * basis_s_, cs = basis_c_ * basis_s_;
  const double lambda[2] = {a * cc + 2.0 * b * cs + d * ss, a * ss - 2.0 * b * cs + d * cc};
  for (int i = 0; i < 2; ++i) {
    const double rate = 0.5 * gamma_ - half_gain * lambda[i];
    decay_[i] = std::exp(-rate * dt);
    const double x = 2.0 * rate * dt;
    const double var = std::abs(x) < 1e-12 ? dt : -std::expm1(-x) / (2.0 * rate);
    kick_[i] = sigma_ * std::sqrt(var);
  }
}

void RotatingIntegrator::step_saturated(RotatingState& st, double n1, double n2) {
  const auto f = feedback_force_quadratures(st, cfg_);
  const double sq = sigma_ * std::sqrt(dt_);
  const double dx1 = (-0.5 * gamma_ * st.x1 - drive_scale_ * f.f2) * dt_ + sq * n1;
  const double dx2 = (-0.5 * gamma_ * st.x2 + drive_scale_ * f.f1) * dt_ + sq * n2;
  st.x1 += dx1;
  st.x2 += dx2;
}

void RotatingIntegrator::step(RotatingState& st, Rng& rng) {
  const double n1 = rng.gaussian();
  const double n2 = rng.gaussian();
  bool saturated = false;
  if (has_feedback_ && fmax_) {
    const double f1 = force_scale_ * (k11_ * st.x1 + k12_ * st.x2);
    const double f2 = force_scale_ * (k21_ * st.x1 + k22_ * st.x2);
    saturated = std::hypot(f1, f2) > *fmax_;
  }
  if (saturated) {
    step_saturated(st, n1, n2);
  } else {
    const double y1 = basis_c_ * st.x1 + basis_s_ * st.x2;
    const double y2 = -basis_s_ * st.x1 + basis_c_ * st.x2;
    const double z1 = decay_[0] * y1 + kick_[0] * n1;
    const double z2 = decay_[1] * y2 + kick_[1] * n2;
    st.x1 = basis_c_ * z1 - basis_s_ * z2;
    st.x2 = basis_s_ * z1 + basis_c_ * z2;
  }
  ++st.step;
  st.time = static_cast<double>(st.step) * dt_;
  if (!std::isfinite(st.x1) || !std::isfinite(st.x2)) diverged(st.step, st.time);
}

void RotatingIntegrator::step_driven(RotatingState& st, double dx1, double dx2) {
  // The increment arrives mid-step on average: half a step of decay keeps the
  // stationary variance right to second order in rate * dt.
  const double y1 = basis_c_ * st.x1 + basis_s_ * st.x2;
  const double y2 = -basis_s_ * st.x1 + basis_c_ * st.x2;
  const double d1 = basis_c_ * dx1 + basis_s_ * dx2;
  const double d2 = -basis_s_ * dx1 + basis_c_ * dx2;
  const double z1 = decay_[0] * y1 + std::sqrt(decay_[0]) * d1;
  const double z2 = decay_[1] * y2 + std::sqrt(decay_[1]) * d2;
  st.x1 = basis_c_ * z1 - basis_s_ * z2;
  st.x2 = basis_s_ * z1 + basis_c_ * z2;
  ++st.step;
  st.time = static_cast<double>(st.step) * dt_;
  if (!std::isfinite(st.x1) || !std::isfinite(st.x2)) diverged(st.step, st.time);
}

RotatingState step_rotating(const RotatingState& state, const SimConfig& cfg, Rng& rng) {
  if (cfg.integrator != Integrator::RotatingFrame)
    fail(ErrorCode::Config, "step_rotating called with a full-band configuration");
  validate(cfg.feedback);
  RotatingIntegrator integ(cfg, cfg.time_step);
  RotatingState next = state;
  integ.step(next, rng);
  return next;
}

// --- experiment runners ----------------------------------------------------

namespace {

QuadratureTrace run_rotating(const SimConfig& cfg) {
  const std::uint64_t n_sub = substeps(cfg.output_sample_period, cfg.time_step);
  const double h = cfg.output_sample_period / static_cast<double>(n_sub);
  RotatingIntegrator integ(cfg, h);
  Rng rng(mix_seed(cfg.seed, 0));
  RotatingState st;
  st.x1 = cfg.initial_x1;
  st.x2 = cfg.initial_x2;

  const double warm = cfg.warmup.value_or(default_warmup(cfg));
  const auto warm_steps = static_cast<std::uint64_t>(std::ceil(warm / h - kSlack));
  for (std::uint64_t i = 0; i < warm_steps; ++i) integ.step(st, rng);

  QuadratureTrace out;
  out.sample_period = cfg.output_sample_period;
  out.origin = TraceOrigin::DirectRotatingFrame;
  out.seed = cfg.seed;
  const std::size_t n = sample_count(cfg);
  out.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::uint64_t i = 0; i < n_sub; ++i) integ.step(st, rng);
    out.samples.push_back({st.x1, st.x2});
  }
  return out;
}

Demodulator make_demodulator(const SimConfig& cfg, double h) {
  FilterSpec spec = cfg.filter;
  spec.bandpass_center = cfg.oscillator.resonance_angular_frequency();
  DemodConfig dc;
  dc.reference_frequency = cfg.oscillator.resonance_angular_frequency();
  dc.gain_correction = calibrate_gain(spec, dc, h);
  dc.meters_per_radian = 1.0 / cfg.optics.phase_gain();
  dc.output_sample_period = cfg.output_sample_period;
  return Demodulator(spec, dc, h);
}

QuadratureTrace run_full_band(const SimConfig& cfg) {
  const std::uint64_t n_sub = substeps(cfg.output_sample_period, cfg.time_step);
  const double h = cfg.output_sample_period / static_cast<double>(n_sub);
  FullBandIntegrator integ(cfg, h);
  Rng rng(mix_seed(cfg.seed, 0));
  PhaseReadout readout(cfg.optics, h, cfg.phase_noise, mix_seed(cfg.seed, 1));
  Demodulator demod = make_demodulator(cfg, h);

  FullBandState st;
  st.position = cfg.initial_x1;
  st.velocity = cfg.oscillator.resonance_angular_frequency() * cfg.initial_x2;

  const double warm = cfg.warmup.value_or(default_warmup(cfg));
  const std::uint64_t warm_outputs = static_cast<std::uint64_t>(std::ceil(warm / cfg.output_sample_period - kSlack));
  QuadratureTrace out;
  out.sample_period = cfg.output_sample_period;
  out.origin = TraceOrigin::DemodulatedReadout;
  out.seed = cfg.seed;
  const std::size_t n = sample_count(cfg);
  out.samples.reserve(n);
  std::uint64_t produced = 0;
  while (out.samples.size() < n) {
    const bool ready = demod.push(readout(st.position));
    integ.step(st, rng);
    if (!ready) continue;
    if (produced++ >= warm_outputs) out.samples.push_back(demod.output());
  }
  return out;
}

}  // namespace

QuadratureTrace run_experiment(const SimConfig& cfg) {
  validate(cfg);
  if (sample_count(cfg) == 0) fail(ErrorCode::Config, "SimConfig: duration shorter than one output sample");
  return cfg.integrator == Integrator::FullBand ? run_full_band(cfg) : run_rotating(cfg);
}

PairedTraces run_paired(const SimConfig& cfg) {
  validate(cfg);
  if (cfg.integrator != Integrator::FullBand) fail(ErrorCode::Config, "run_paired needs a full-band configuration");
  if (cfg.feedback.saturation_force) fail(ErrorCode::Config, "run_paired needs a linear feedback loop");
  if (sample_count(cfg) == 0) fail(ErrorCode::Config, "SimConfig: duration shorter than one output sample");
  const std::uint64_t n_sub = substeps(cfg.output_sample_period, cfg.time_step);
  const double h = cfg.output_sample_period / static_cast<double>(n_sub);
  FullBandIntegrator full(cfg, h);
  SimConfig rot_cfg = cfg;
  rot_cfg.integrator = Integrator::RotatingFrame;
  RotatingIntegrator rot(rot_cfg, h);
  Rng rng(mix_seed(cfg.seed, 0));
  PhaseReadout readout(cfg.optics, h, cfg.phase_noise, mix_seed(cfg.seed, 1));
  Demodulator demod = make_demodulator(cfg, h);
  auto lp1 = SvfFilter::lowpass(cfg.filter.lowpass_cutoff, 1.0 / h);
  auto lp2 = SvfFilter::lowpass(cfg.filter.lowpass_cutoff, 1.0 / h);

  const double omega = cfg.oscillator.resonance_angular_frequency();
  const double to_quadrature = 1.0 / (cfg.oscillator.effective_mass() * omega);
  FullBandState st;
  st.position = cfg.initial_x1;
  st.velocity = omega * cfg.initial_x2;
  RotatingState rs;
  rs.x1 = cfg.initial_x1;
  rs.x2 = cfg.initial_x2;

  const double warm = cfg.warmup.value_or(default_warmup(cfg));
  const std::uint64_t warm_outputs = static_cast<std::uint64_t>(std::ceil(warm / cfg.output_sample_period - kSlack));
  PairedTraces out;
  for (auto* t : {&out.full_band, &out.rotating}) {
    t->sample_period = cfg.output_sample_period;
    t->seed = cfg.seed;
    t->samples.reserve(sample_count(cfg));
  }
  out.full_band.origin = TraceOrigin::DemodulatedReadout;
  out.rotating.origin = TraceOrigin::DirectRotatingFrame;
  const std::size_t n = sample_count(cfg);
  std::uint64_t produced = 0;
  while (out.full_band.samples.size() < n) {
    const bool ready = demod.push(readout(st.position));
    const double y1 = lp1.process(rs.x1);
    const double y2 = lp2.process(rs.x2);
    const double phase = omega * st.time;
    const double kick = full.step(st, rng) * to_quadrature;
    rot.step_driven(rs, -std::sin(phase) * kick, std::cos(phase) * kick);
    if (!ready) continue;
    if (produced++ >= warm_outputs) {
      out.full_band.samples.push_back(demod.output());
      out.rotating.samples.push_back({y1, y2});
    }
  }
  return out;
}

QuadratureTrace run_rotating_filtered(const SimConfig& cfg) {
  validate(cfg);
  if (cfg.integrator != Integrator::RotatingFrame)
    fail(ErrorCode::Config, "run_rotating_filtered needs a rotating-frame configuration");
  const std::uint64_t n_sub = substeps(cfg.output_sample_period, cfg.time_step);
  const double h = cfg.output_sample_period / static_cast<double>(n_sub);
  RotatingIntegrator integ(cfg, h);
  Rng rng(mix_seed(cfg.seed, 0));
  RotatingState st;
  st.x1 = cfg.initial_x1;
  st.x2 = cfg.initial_x2;
  auto lp1 = SvfFilter::lowpass(cfg.filter.lowpass_cutoff, 1.0 / h);
  auto lp2 = SvfFilter::lowpass(cfg.filter.lowpass_cutoff, 1.0 / h);

  const double warm = cfg.warmup.value_or(default_warmup(cfg)) + 30.0 / (kTwoPi * cfg.filter.lowpass_cutoff);
  const auto warm_steps = static_cast<std::uint64_t>(std::ceil(warm / h - kSlack));
  for (std::uint64_t i = 0; i < warm_steps; ++i) {
    lp1.process(st.x1);
    lp2.process(st.x2);
    integ.step(st, rng);
  }
  QuadratureTrace out;
  out.sample_period = cfg.output_sample_period;
  out.origin = TraceOrigin::DirectRotatingFrame;
  out.seed = cfg.seed;
  const std::size_t n = sample_count(cfg);
  out.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    double y1 = 0.0, y2 = 0.0;
    for (std::uint64_t i = 0; i < n_sub; ++i) {
      y1 = lp1.process(st.x1);
      y2 = lp2.process(st.x2);
      integ.step(st, rng);
    }
    out.samples.push_back({y1, y2});
  }
  return out;
}

}  // namespace mirrorsim
