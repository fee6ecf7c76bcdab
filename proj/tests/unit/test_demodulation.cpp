#include <cmath>
#include <functional>
#include <vector>

#include "demodulation.hpp"
#include "doctest.h"
#include "error.hpp"
#include "rng.hpp"

using namespace mirrorsim;

namespace {

constexpr double kPi = 3.14159265358979323846;

FilterSpec paper_spec() {
  FilterSpec s;
  s.bandpass_center = 2 * kPi * 1859e3;
  return s;
}

// Calibrated chain at 12 samples per carrier period, output every 1/(4 f_c).
DemodConfig paper_demod(const FilterSpec& s, double dt, double phase = 0.0) {
  DemodConfig c;
  c.reference_frequency = s.bandpass_center;
  c.reference_phase = phase;
  c.gain_correction = calibrate_gain(s, c, dt);
  c.output_sample_period = std::ceil(1.0 / (4.0 * s.lowpass_cutoff) / dt) * dt;
  return c;
}

PhaseTrace tone(std::function<double(double)> x, double dt, std::size_t n) {
  PhaseTrace p;
  p.sample_period = dt;
  p.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) p.samples[k] = x(k * dt);
  return p;
}

// Mean of the last half of the output (past every settling transient).
QuadraturePoint settled(const QuadratureTrace& t) {
  QuadraturePoint m;
  const std::size_t start = t.size() / 2;
  for (std::size_t k = start; k < t.size(); ++k) {
    m.x1 += t.samples[k].x1;
    m.x2 += t.samples[k].x2;
  }
  m.x1 /= double(t.size() - start);
  m.x2 /= double(t.size() - start);
  return m;
}

// Steady-state amplitude of a filter driven at f.
double response(SvfFilter f, double freq, double fs) {
  const std::size_t n = static_cast<std::size_t>(fs / freq * 4000);
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double y = f.process(std::cos(2 * kPi * freq * k / fs));
    if (k > n / 2) peak = std::max(peak, std::abs(y));
  }
  return peak;
}

}  // namespace

TEST_CASE("low-pass section equals the bilinear Butterworth biquad") {
  // The direct form loses ~eps/k^2 near DC, so keep fc/fs moderate.
  const double fc = 460.0, fs = 1e5;
  const double k = std::tan(kPi * fc / fs), r2 = std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + r2 * k + k * k);
  const double b0 = k * k * norm, b1 = 2 * b0, b2 = b0;
  const double a1 = 2 * (k * k - 1) * norm, a2 = (1 - r2 * k + k * k) * norm;
  auto svf = SvfFilter::lowpass(fc, fs);
  Rng rng(3);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0, worst = 0, scale = 0;
  for (int n = 0; n < 200000; ++n) {
    const double x = rng.gaussian();
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1, x1 = x, y2 = y1, y1 = y;
    worst = std::max(worst, std::abs(svf.process(x) - y));
    scale = std::max(scale, std::abs(y));
  }
  CHECK(worst < 1e-9 * scale);
  CHECK(response(SvfFilter::lowpass(1000.0, 1e5), 1000.0, 1e5) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("resonant band-pass: unity peak and -3 dB edges") {
  const double f0 = 1e4, w = 2e3, fs = 1.2e5;
  const auto bp = SvfFilter::bandpass(f0, w, fs);
  CHECK(response(bp, f0, fs) == doctest::Approx(1.0).epsilon(0.002));
  // edges of a constant-Q resonator sit at f0 (sqrt(1 + 1/4Q^2) -+ 1/2Q)
  const double q = f0 / w;
  const double lo = f0 * (std::sqrt(1 + 1 / (4 * q * q)) - 1 / (2 * q));
  const double hi = f0 * (std::sqrt(1 + 1 / (4 * q * q)) + 1 / (2 * q));
  CHECK(response(bp, lo, fs) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.03));
  CHECK(response(bp, hi, fs) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.03));
  CHECK(response(bp, 3 * f0, fs) < 0.1);
}

TEST_CASE("injected tones come back as quadratures") {
  const auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  const auto cfg = paper_demod(spec, dt);
  const double w = spec.bandpass_center, a = 5.4e-16;
  const std::size_t n = static_cast<std::size_t>(0.03 / dt);
  const auto c = settled(demodulate(tone([&](double t) { return a * std::cos(w * t); }, dt, n), spec, cfg));
  CHECK(c.x1 == doctest::Approx(a).epsilon(0.01));
  CHECK(std::abs(c.x2) < 0.01 * a);
  const auto s = settled(demodulate(tone([&](double t) { return a * std::sin(w * t); }, dt, n), spec, cfg));
  CHECK(std::abs(s.x1) < 0.01 * a);
  CHECK(s.x2 == doctest::Approx(a).epsilon(0.01));
}

TEST_CASE("a quarter-period shift rotates the quadratures") {
  const auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  const auto cfg = paper_demod(spec, dt);
  const double w = spec.bandpass_center, quarter = kPi / (2 * w);
  const double a = 3e-16, b = -1.2e-16;
  const std::size_t n = static_cast<std::size_t>(0.03 / dt);
  auto x = [&](double t) { return a * std::cos(w * t) + b * std::sin(w * t); };
  const auto base = settled(demodulate(tone(x, dt, n), spec, cfg));
  REQUIRE(base.x1 == doctest::Approx(a).epsilon(0.01));
  REQUIRE(base.x2 == doctest::Approx(b).epsilon(0.01));
  // x(t + T/4): (X1, X2) -> (X2, -X1)
  const auto adv = settled(demodulate(tone([&](double t) { return x(t + quarter); }, dt, n), spec, cfg));
  CHECK(adv.x1 == doctest::Approx(b).epsilon(0.01));
  CHECK(adv.x2 == doctest::Approx(-a).epsilon(0.01));
  // x(t - T/4): (X1, X2) -> (-X2, X1)
  const auto del = settled(demodulate(tone([&](double t) { return x(t - quarter); }, dt, n), spec, cfg));
  CHECK(del.x1 == doctest::Approx(-b).epsilon(0.01));
  CHECK(del.x2 == doctest::Approx(a).epsilon(0.01));
  // delaying the references by T/4 instead
  const auto ref = settled(demodulate(tone(x, dt, n), spec, paper_demod(spec, dt, kPi / 2)));
  CHECK(ref.x1 == doctest::Approx(b).epsilon(0.01));
  CHECK(ref.x2 == doctest::Approx(-a).epsilon(0.01));
}

TEST_CASE("demodulation is linear") {
  const auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  const auto cfg = paper_demod(spec, dt);
  const double w = spec.bandpass_center;
  const std::size_t n = static_cast<std::size_t>(0.01 / dt);
  auto f = [&](double t) { return 1e-15 * std::cos(w * t + 0.3) * (1 + 0.5 * std::sin(900 * t)); };
  auto g = [&](double t) { return 4e-16 * std::sin(1.001 * w * t); };
  const auto df = demodulate(tone(f, dt, n), spec, cfg);
  const auto dg = demodulate(tone(g, dt, n), spec, cfg);
  const auto dh = demodulate(tone([&](double t) { return -3.0 * f(t) + 0.5 * g(t); }, dt, n), spec, cfg);
  REQUIRE(dh.size() == df.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < dh.size(); ++k) {
    worst = std::max(worst, std::abs(dh.samples[k].x1 - (-3.0 * df.samples[k].x1 + 0.5 * dg.samples[k].x1)));
    worst = std::max(worst, std::abs(dh.samples[k].x2 - (-3.0 * df.samples[k].x2 + 0.5 * dg.samples[k].x2)));
  }
  CHECK(worst < 1e-12 * 3e-15);
}

TEST_CASE("no 2 Omega ripple in the decimated output") {
  const auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  const auto cfg = paper_demod(spec, dt);
  const double w = spec.bandpass_center, a = 1e-15;
  const auto out =
      demodulate(tone([&](double t) { return a * std::cos(w * t); }, dt, static_cast<std::size_t>(0.06 / dt)), spec, cfg);
  const auto m = settled(out);
  double ripple = 0.0;
  for (std::size_t k = out.size() / 2; k < out.size(); ++k)
    ripple = std::max({ripple, std::abs(out.samples[k].x1 - m.x1), std::abs(out.samples[k].x2 - m.x2)});
  CHECK(20 * std::log10(ripple / m.x1) < -100.0);
}

TEST_CASE("measured noise bandwidth") {
  const auto spec = paper_spec();
  const double b = measure_noise_bandwidth(spec);
  // Lorentzian band-pass much wider than the low-pass: 2 S per quadrature
  // times the two-sided Butterworth bandwidth 2 (pi/4)/sin(pi/4) f_c.
  const double analytic = 2.0 * 2.0 * (kPi / 4) / std::sin(kPi / 4) * spec.lowpass_cutoff;
  CHECK(b == doctest::Approx(analytic).epsilon(0.05));

  CHECK(noise_equivalent_displacement(spec, 0.0) == 0.0);
  CHECK(noise_equivalent_displacement(spec, 2.8e-19) == doctest::Approx(2.8e-19 * std::sqrt(b)).epsilon(1e-12));
  FilterSpec wide = spec;
  wide.lowpass_cutoff *= 2;
  CHECK(noise_equivalent_displacement(wide, 2.8e-19) / noise_equivalent_displacement(spec, 2.8e-19) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("demodulated readout noise matches the predicted floor") {
  const auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  auto cfg = paper_demod(spec, dt);
  const OpticalParams optics;
  cfg.meters_per_radian = 1.0 / optics.phase_gain();
  PhaseReadout readout(optics, dt, true, 21);
  Demodulator demod(spec, cfg, dt);
  const auto settle = static_cast<std::uint64_t>(0.02 / dt), total = settle + static_cast<std::uint64_t>(2.0 / dt);
  double s1 = 0, s2 = 0, q1 = 0, q2 = 0;
  std::size_t count = 0;
  for (std::uint64_t k = 0; k < total; ++k) {
    if (demod.push(readout(0.0)) && k >= settle) {
      const auto p = demod.output();
      s1 += p.x1, s2 += p.x2, q1 += p.x1 * p.x1, q2 += p.x2 * p.x2;
      ++count;
    }
  }
  const double r1 = std::sqrt(q1 / count - (s1 / count) * (s1 / count));
  const double r2 = std::sqrt(q2 / count - (s2 / count) * (s2 / count));
  const double predicted = noise_equivalent_displacement(spec, optics.sensitivity_floor);
  CHECK(r1 == doctest::Approx(predicted).epsilon(0.05));
  CHECK(r2 == doctest::Approx(predicted).epsilon(0.05));
}

TEST_CASE("chain configuration errors") {
  auto spec = paper_spec();
  const double dt = chain_sample_period(spec);
  DemodConfig c;
  c.reference_frequency = spec.bandpass_center;
  CHECK_THROWS_AS(Demodulator(spec, c, 1.2 * 2 * kPi / (10 * spec.bandpass_center)), Error);
  c.output_sample_period = 10 * dt;  // far below 1/(4 f_c)
  CHECK_THROWS_AS(Demodulator(spec, c, dt), Error);
  c.output_sample_period = 0.0;
  c.channel_mismatch = 0.05;
  try {
    Demodulator d(spec, c, dt);
    FAIL("expected a calibration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Calibration);
  }
  spec.lowpass_order = 4;
  CHECK_THROWS_AS(validate(spec), Error);
}
