#include "demodulation.hpp"

#include <cmath>
#include <string>

#include "error.hpp"
#include "model.hpp"

namespace mirrorsim {

namespace {

constexpr double kTwoPi = 2.0 * constants::pi;

std::size_t decimation_for(double output_period, double sample_period) {
  if (output_period <= 0.0) return 1;
  const double ratio = output_period / sample_period;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-6 * n)
    fail(ErrorCode::Config, "output sample period must be an integer multiple of the input period");
  return static_cast<std::size_t>(n);
}

void check_rate(const FilterSpec& spec, double sample_period) {
  if (!(sample_period > 0.0)) fail(ErrorCode::Config, "sample period must be > 0");
  const double carrier_hz = spec.bandpass_center / kTwoPi;
  if (1.0 / sample_period < 10.0 * carrier_hz * (1.0 - 1e-12))
    fail(ErrorCode::Config, "input sampled below 10 samples per carrier period");
}

}  // namespace

void validate(const FilterSpec& s) {
  if (!(s.bandpass_center > 0.0)) fail(ErrorCode::Config, "FilterSpec: bandpass_center must be > 0");
  if (!(s.bandpass_width > 0.0)) fail(ErrorCode::Config, "FilterSpec: bandpass_width must be > 0");
  if (!(s.lowpass_cutoff > 0.0)) fail(ErrorCode::Config, "FilterSpec: lowpass_cutoff must be > 0");
  if (s.lowpass_order != 2)
    fail(ErrorCode::Config, "FilterSpec: lowpass_order must be 2, got " + std::to_string(s.lowpass_order));
}

SvfFilter::SvfFilter(double g, double k, bool bandpass) : k_(k), bandpass_(bandpass) {
  a1_ = 1.0 / (1.0 + g * (g + k));
  a2_ = g * a1_;
  a3_ = g * a2_;
}

SvfFilter SvfFilter::lowpass(double cutoff_hz, double sample_rate) {
  const double g = std::tan(constants::pi * cutoff_hz / sample_rate);
  return SvfFilter(g, std::sqrt(2.0), false);
}

SvfFilter SvfFilter::bandpass(double center_hz, double width_hz, double sample_rate) {
  const double g = std::tan(constants::pi * center_hz / sample_rate);
  return SvfFilter(g, width_hz / center_hz, true);
}

double square_reference(double t, double omega, double phase, double sample_period) noexcept {
  const double cycles = (omega * t - phase) / kTwoPi;
  const double frac = cycles - std::floor(cycles);
  // Averaged over [t - dt/2, t + dt/2]: linear across a sign change, so a
  // crossing that falls on a sample gives 0 instead of a rounding-dependent +-1.
  const double half = 0.5 * omega * sample_period / kTwoPi;
  if (std::abs(frac - 0.25) < half) return (0.25 - frac) / half;
  if (std::abs(frac - 0.75) < half) return (frac - 0.75) / half;
  return (frac < 0.25 || frac > 0.75) ? 1.0 : -1.0;
}

std::vector<double> bandpass(std::span<const double> signal, double sample_period,
                             const FilterSpec& spec) {
  validate(spec);
  check_rate(spec, sample_period);
  auto f = SvfFilter::bandpass(spec.bandpass_center / kTwoPi, spec.bandpass_width, 1.0 / sample_period);
  std::vector<double> out;
  out.reserve(signal.size());
  for (double s : signal) out.push_back(f.process(s));
  return out;
}

std::vector<double> lowpass2(std::span<const double> signal, double sample_period,
                             const FilterSpec& spec) {
  if (spec.lowpass_order != 2) fail(ErrorCode::Config, "FilterSpec: lowpass_order must be 2");
  if (!(spec.lowpass_cutoff > 0.0)) fail(ErrorCode::Config, "FilterSpec: lowpass_cutoff must be > 0");
  auto f = SvfFilter::lowpass(spec.lowpass_cutoff, 1.0 / sample_period);
  std::vector<double> out;
  out.reserve(signal.size());
  for (double s : signal) out.push_back(f.process(s));
  return out;
}

std::vector<double> mix_square(std::span<const double> signal, double sample_period,
                               const DemodConfig& cfg, double phase_offset) {
  std::vector<double> out;
  out.reserve(signal.size());
  const double phase = cfg.reference_phase + phase_offset;
  for (std::size_t n = 0; n < signal.size(); ++n) {
    const double t = static_cast<double>(n) * sample_period;
    out.push_back(signal[n] * square_reference(t, cfg.reference_frequency, phase, sample_period));
  }
  return out;
}

Demodulator::Demodulator(const FilterSpec& spec, const DemodConfig& cfg, double sample_period)
    : cfg_(cfg),
      sample_period_(sample_period),
      omega_(cfg.reference_frequency),
      phase_i_(cfg.reference_phase),
      phase_q_(cfg.reference_phase + 0.5 * constants::pi),
      gain_i_(cfg.gain_correction),
      gain_q_(cfg.gain_correction * (1.0 + cfg.channel_mismatch)),
      bandpass_(SvfFilter::bandpass(spec.bandpass_center / kTwoPi, spec.bandpass_width,
                                    1.0 / sample_period)),
      lowpass_i_(SvfFilter::lowpass(spec.lowpass_cutoff, 1.0 / sample_period)),
      lowpass_q_(SvfFilter::lowpass(spec.lowpass_cutoff, 1.0 / sample_period)),
      decimation_(decimation_for(cfg.output_sample_period, sample_period)) {
  validate(spec);
  check_rate(spec, sample_period);
  if (!(cfg.gain_correction > 0.0)) fail(ErrorCode::Config, "DemodConfig: gain_correction must be > 0");
  if (!(cfg.reference_frequency > 0.0))
    fail(ErrorCode::Config, "DemodConfig: reference_frequency must be > 0");
  if (std::abs(cfg.channel_mismatch) > 0.01)
    fail(ErrorCode::Calibration, "demodulation channels mismatched by more than 1%");
  if (cfg.output_sample_period > 0.0 &&
      cfg.output_sample_period < 1.0 / (4.0 * spec.lowpass_cutoff) * (1.0 - 1e-9))
    fail(ErrorCode::Config, "output sample period shorter than 1/(4 f_c)");
}

double calibrate_gain(const FilterSpec& spec, DemodConfig cfg, double sample_period) {
  cfg.gain_correction = 1.0;
  cfg.channel_mismatch = 0.0;
  cfg.output_sample_period = 0.0;
  cfg.meters_per_radian = 1.0;
  validate(spec);

  const double tau_lp = 1.0 / (kTwoPi * spec.lowpass_cutoff);
  const double tau_bp = 1.0 / (constants::pi * spec.bandpass_width);
  const double settle = 30.0 * (tau_lp + tau_bp);
  const double average = 40.0 * tau_lp + 200.0 * kTwoPi / cfg.reference_frequency;
  const auto n_settle = static_cast<std::uint64_t>(std::ceil(settle / sample_period));
  const auto n_total = n_settle + static_cast<std::uint64_t>(std::ceil(average / sample_period));

  double response[2] = {0.0, 0.0};
  for (int channel = 0; channel < 2; ++channel) {
    Demodulator demod(spec, cfg, sample_period);
    double acc = 0.0;
    for (std::uint64_t n = 0; n < n_total; ++n) {
      const double t = static_cast<double>(n) * sample_period;
      const double arg = cfg.reference_frequency * t - cfg.reference_phase;
      demod.push(channel == 0 ? std::cos(arg) : std::sin(arg));
      if (n >= n_settle) acc += channel == 0 ? demod.output().x1 : demod.output().x2;
    }
    response[channel] = acc / static_cast<double>(n_total - n_settle);
  }
  if (!(response[0] > 0.0) || !(response[1] > 0.0))
    fail(ErrorCode::Calibration, "demodulation chain gives no DC response to the reference tone");
  if (std::abs(response[1] / response[0] - 1.0) > 0.01)
    fail(ErrorCode::Calibration, "demodulation channels mismatched by more than 1%");
  return 1.0 / response[0];
}

QuadratureTrace demodulate(const PhaseTrace& phase, const FilterSpec& spec, const DemodConfig& cfg) {
  Demodulator demod(spec, cfg, phase.sample_period);
  QuadratureTrace out;
  out.origin = TraceOrigin::DemodulatedReadout;
  out.sample_period = phase.sample_period * static_cast<double>(demod.decimation());
  out.samples.reserve(phase.samples.size() / demod.decimation() + 1);
  for (double s : phase.samples)
    if (demod.push(s)) out.samples.push_back(demod.output());
  return out;
}

double chain_sample_period(const FilterSpec& spec) {
  return kTwoPi / (12.0 * spec.bandpass_center);
}

double measure_noise_bandwidth(const FilterSpec& spec, double duration_per_cutoff, std::uint64_t seed) {
  validate(spec);
  const double dt = chain_sample_period(spec);
  DemodConfig cfg;
  cfg.reference_frequency = spec.bandpass_center;
  cfg.gain_correction = calibrate_gain(spec, cfg, dt);
  const auto decim = static_cast<std::size_t>(std::ceil(1.0 / (4.0 * spec.lowpass_cutoff) / dt));
  cfg.output_sample_period = static_cast<double>(decim) * dt;

  Demodulator demod(spec, cfg, dt);
  Rng rng(seed);
  const double sigma = 1.0 / std::sqrt(dt);  // unit double-sided density
  const double settle = 30.0 / (kTwoPi * spec.lowpass_cutoff) + 30.0 / (constants::pi * spec.bandpass_width);
  const auto n_settle = static_cast<std::uint64_t>(std::ceil(settle / dt));
  const auto n_total = n_settle + static_cast<std::uint64_t>(std::ceil(duration_per_cutoff / spec.lowpass_cutoff / dt));

  double s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
  std::size_t count = 0;
  for (std::uint64_t n = 0; n < n_total; ++n) {
    if (demod.push(sigma * rng.gaussian()) && n >= n_settle) {
      const auto p = demod.output();
      s1 += p.x1;
      s2 += p.x2;
      q1 += p.x1 * p.x1;
      q2 += p.x2 * p.x2;
      ++count;
    }
  }
  if (count < 2) fail(ErrorCode::InsufficientData, "noise bandwidth run too short");
  const double c = static_cast<double>(count);
  const double v1 = q1 / c - (s1 / c) * (s1 / c);
  const double v2 = q2 / c - (s2 / c) * (s2 / c);
  return 0.5 * (v1 + v2);
}

double noise_equivalent_displacement(const FilterSpec& spec, double delta_x_min) {
  if (!(delta_x_min >= 0.0)) fail(ErrorCode::Domain, "sensitivity floor must be >= 0");
  if (delta_x_min == 0.0) return 0.0;
  return delta_x_min * std::sqrt(measure_noise_bandwidth(spec));
}

}  // namespace mirrorsim
