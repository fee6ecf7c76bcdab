#include <algorithm>
#include <cmath>
#include <vector>

#include "analysis.hpp"
#include "doctest.h"
#include "error.hpp"
#include "simulator.hpp"

using namespace mirrorsim;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kB = 1.380649e-23;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

SimConfig rotating(FeedbackMode mode, double g, double duration, std::uint64_t seed) {
  SimConfig c;
  c.integrator = Integrator::RotatingFrame;
  c.feedback.mode = mode;
  c.feedback.gain = g;
  c.duration = duration;
  c.seed = seed;
  c.time_step = max_time_step(c);
  return c;
}

}  // namespace

TEST_CASE("Langevin increment variance") {
  const auto p = OscillatorParams::paper();
  EnvironmentParams e;
  Rng rng(7);
  const double dt = 1e-5;
  std::vector<double> j(200000);
  for (auto& x : j) x = generate_langevin_increment(rng, p, e, dt);
  const double expected = 2 * p.effective_mass() * p.damping_rate() * kB * 300.0 * dt;
  CHECK(var_of(j) == doctest::Approx(expected).epsilon(0.015));
  CHECK(std::abs(mean_of(j)) < 4 * std::sqrt(expected / j.size()));
  e.temperature = 0.0;
  CHECK(generate_langevin_increment(rng, p, e, dt) == 0.0);
}

TEST_CASE("one rotating step at dt = 1/Gamma reproduces the OU transition") {
  // Relaxation rate per quadrature and the stationary variance it relaxes to.
  struct Mode {
    FeedbackMode mode;
    double g;
    double rate1, rate2;  // in units of Gamma
  };
  const Mode modes[] = {{FeedbackMode::Off, 0.0, 0.5, 0.5},
                        {FeedbackMode::ColdDamp, 3.0, 2.0, 2.0},
                        {FeedbackMode::ParametricViscous, 0.8, 0.9, 0.1}};
  for (const auto& m : modes) {
    CAPTURE(m.g);
    SimConfig c = rotating(m.mode, m.g, 1.0, 1);
    const double gamma = c.oscillator.damping_rate();
    const double dt = 1.0 / gamma;
    const double vth = thermal_variance(c.oscillator, c.environment);
    const double x0[2] = {5 * std::sqrt(vth), -3 * std::sqrt(vth)};
    const double rate[2] = {m.rate1 * gamma, m.rate2 * gamma};

    // noiseless: exact exponential
    SimConfig cold = c;
    cold.environment.temperature = 0.0;
    RotatingIntegrator det(cold, dt);
    Rng r0(1);
    RotatingState s0{x0[0], x0[1]};
    det.step(s0, r0);
    CHECK(s0.x1 == doctest::Approx(x0[0] * std::exp(-rate[0] * dt)).epsilon(1e-12));
    CHECK(s0.x2 == doctest::Approx(x0[1] * std::exp(-rate[1] * dt)).epsilon(1e-12));

    RotatingIntegrator integ(c, dt);
    Rng rng(11);
    const int n = 100000;
    std::vector<double> a(n), b(n);
    for (int k = 0; k < n; ++k) {
      RotatingState s{x0[0], x0[1]};
      integ.step(s, rng);
      a[k] = s.x1;
      b[k] = s.x2;
    }
    const std::vector<double>* xs[2] = {&a, &b};
    for (int i = 0; i < 2; ++i) {
      // diffusion Gamma V_th per quadrature
      const double var = gamma * vth * -std::expm1(-2 * rate[i] * dt) / (2 * rate[i]);
      const double mean = x0[i] * std::exp(-rate[i] * dt);
      CHECK(std::abs(mean_of(*xs[i]) - mean) < 4 * std::sqrt(var / n));
      CHECK(var_of(*xs[i]) == doctest::Approx(var).epsilon(0.02));
    }
  }
}

TEST_CASE("full-band ring-down follows exp(-Gamma t / 2)") {
  SimConfig c;
  c.integrator = Integrator::FullBand;
  c.oscillator = OscillatorParams::scaled();
  c.environment.temperature = 0.0;
  const double w = c.oscillator.resonance_angular_frequency();
  const double gamma = c.oscillator.damping_rate();
  const double dt = 1e-6;
  FullBandIntegrator integ(c, dt);
  Rng rng(1);
  FullBandState s;
  s.position = 1e-12;
  const double t_end = 2.0 / gamma;
  double peak = 0.0;
  while (s.time < t_end) {
    integ.step(s, rng);
    if (s.time > t_end - 2 * kPi / w) peak = std::max(peak, std::abs(s.position));
  }
  CHECK(peak == doctest::Approx(1e-12 * std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("undamped full-band motion conserves energy and rings at Omega_M") {
  SimConfig c;
  c.integrator = Integrator::FullBand;
  c.oscillator = OscillatorParams::make(2 * kPi * 1e4, 1e12, 1e-6);
  c.environment.temperature = 0.0;
  const double w = c.oscillator.resonance_angular_frequency();
  const double h = 1e-6;
  FullBandIntegrator integ(c, h);
  Rng rng(1);
  FullBandState s;
  s.position = 1e-12;
  // For v' = v - h k x, x' = x + h v', the quantity v^2 + k x^2 - h k x v is invariant.
  const double k = std::pow(2 * std::sin(w * h / 2) / h, 2);
  auto energy = [&] { return s.velocity * s.velocity + k * s.position * s.position - h * k * s.position * s.velocity; };
  const double e0 = energy();
  std::vector<double> x;
  for (int n = 0; n < 100000; ++n) {
    integ.step(s, rng);
    if (n >= 99997) x.push_back(s.position);
  }
  CHECK(std::abs(energy() - e0) / e0 < 1e-6);
  // x(n+1) + x(n-1) = 2 cos(w' h) x(n) for the discrete oscillation
  CHECK((x[0] + x[2]) / x[1] == doctest::Approx(2 * std::cos(w * h)).epsilon(1e-9));
}

TEST_CASE("runs are reproducible from the seed") {
  SimConfig c = rotating(FeedbackMode::ColdDamp, 3.0, 0.5, 42);
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  REQUIRE(a.size() == 1000);
  bool same = true;
  for (std::size_t k = 0; k < a.size(); ++k)
    same = same && a.samples[k].x1 == b.samples[k].x1 && a.samples[k].x2 == b.samples[k].x2;
  CHECK(same);
  c.seed = 43;
  const auto d = run_experiment(c);
  CHECK(d.samples[10].x1 != a.samples[10].x1);
}

TEST_CASE("configuration errors") {
  SimConfig c = rotating(FeedbackMode::Off, 0.0, 1.0, 1);
  c.time_step = 2 * max_time_step(c);
  CHECK_THROWS_AS(validate(c), Error);

  SimConfig f;
  f.integrator = Integrator::FullBand;
  f.oscillator = OscillatorParams::scaled();
  f.time_step = 2 * kPi / (20 * f.oscillator.resonance_angular_frequency()) * 1.5;
  f.output_sample_period = 2.5e-4;
  f.filter.lowpass_cutoff = 1000.0;
  try {
    validate(f);
    FAIL("expected a stability error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("stability") != std::string::npos);
  }

  SimConfig p = rotating(FeedbackMode::ParametricViscous, 0.5, 1.0, 1);
  p.feedback.gain = 1.2;
  CHECK_THROWS_AS(validate(p), Error);
  p.feedback.saturation_force = 4e-9;
  p.time_step = max_time_step(p);
  CHECK_NOTHROW(validate(p));
}

TEST_CASE("saturated feedback force is clamped") {
  SimConfig c;
  c.feedback.mode = FeedbackMode::ColdDamp;
  c.feedback.gain = 3.0;
  c.feedback.saturation_force = 1e-12;
  FullBandState s;
  s.velocity = 1.0;
  CHECK(feedback_force(s, c, 0.0) == doctest::Approx(-1e-12));
  s.velocity = -1.0;
  CHECK(feedback_force(s, c, 0.0) == doctest::Approx(1e-12));
  s.velocity = 1e-20;
  CHECK(std::abs(feedback_force(s, c, 0.0)) < 1e-12);

  RotatingState r{0.0, 1.0};
  const auto f = feedback_force_quadratures(r, c);
  CHECK(f.saturated);
  CHECK(std::hypot(f.f1, f.f2) == doctest::Approx(1e-12));
}

TEST_CASE("above threshold the noiseless motion settles on the saturated amplitude") {
  SimConfig c = rotating(FeedbackMode::ParametricViscous, 2.0, 1.0, 1);
  c.environment.temperature = 0.0;
  const auto sat = saturation_amplitude(0.5, c.oscillator);
  c.feedback.saturation_force = sat.force;
  c.time_step = max_time_step(c);
  RotatingIntegrator integ(c, c.time_step);
  Rng rng(1);
  RotatingState s{1e-17, 1e-17};
  const double gamma = c.oscillator.damping_rate();
  while (s.time < 60.0 / gamma) integ.step(s, rng);
  const auto& p = c.oscillator;
  const double expected = sat.force / (p.effective_mass() * gamma * p.resonance_angular_frequency());
  CHECK(s.x2 == doctest::Approx(expected).epsilon(0.01));
  CHECK(std::abs(s.x1) < 1e-3 * expected);
}

TEST_CASE("an unstable time step is reported as divergence") {
  SimConfig c;
  c.integrator = Integrator::FullBand;
  c.oscillator = OscillatorParams::scaled();
  FullBandIntegrator integ(c, 10.0 / c.oscillator.resonance_angular_frequency());
  Rng rng(1);
  FullBandState s;
  s.position = 1e-12;
  try {
    for (int k = 0; k < 100000; ++k) integ.step(s, rng);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Divergence);
  }
}

TEST_CASE("modulated spring equals modulated viscous force up to a 45 degree rotation") {
  const double g = 0.8;
  const auto viscous = run_experiment(rotating(FeedbackMode::ParametricViscous, g, 600.0, 5));
  const auto spring = run_experiment(rotating(FeedbackMode::ParametricSpring, g, 600.0, 6));
  const auto dv = dispersions(viscous);
  const auto ds = dispersions(rotate_quadratures(spring, -kPi / 4));
  CHECK(ds.dx1 * ds.dx1 == doctest::Approx(dv.dx1 * dv.dx1).epsilon(0.05));
  CHECK(ds.dx2 * ds.dx2 == doctest::Approx(dv.dx2 * dv.dx2).epsilon(0.05));
  // unrotated, the spring trace mixes both quadratures
  const auto raw = dispersions(spring);
  CHECK(raw.dx1 == doctest::Approx(raw.dx2).epsilon(0.1));
}

TEST_CASE("halving the rotating-frame step leaves the statistics unchanged") {
  SUBCASE("linear") {
    SimConfig c = rotating(FeedbackMode::ColdDamp, 3.0, 2000.0, 8);
    const auto a = dispersions(run_experiment(c));
    c.time_step *= 0.5;
    const auto b = dispersions(run_experiment(c));
    CHECK(b.dx1 * b.dx1 == doctest::Approx(a.dx1 * a.dx1).epsilon(0.01));
    CHECK(b.dx2 * b.dx2 == doctest::Approx(a.dx2 * a.dx2).epsilon(0.01));
  }
  SUBCASE("saturated") {
    SimConfig c = rotating(FeedbackMode::ParametricViscous, 2.0, 400.0, 9);
    c.feedback.saturation_force = saturation_amplitude(0.5, c.oscillator).force;
    c.time_step = max_time_step(c);
    c.initial_x2 = 6e-15;
    const auto ta = run_experiment(c);
    c.time_step *= 0.5;
    const auto tb = run_experiment(c);
    const auto a = dispersions(ta);
    const auto b = dispersions(tb);
    CHECK(b.dx1 * b.dx1 == doctest::Approx(a.dx1 * a.dx1).epsilon(0.03));
    double ma = 0.0, mb = 0.0;
    for (const auto& s : ta.samples) ma += std::abs(s.x2);
    for (const auto& s : tb.samples) mb += std::abs(s.x2);
    CHECK(mb / tb.size() == doctest::Approx(ma / ta.size()).epsilon(0.03));
  }
}

TEST_CASE("full-band chain and rotating frame agree on shared noise") {
  SimConfig c;
  c.integrator = Integrator::FullBand;
  c.oscillator = OscillatorParams::scaled();
  c.time_step = 1e-6;
  c.output_sample_period = 2.5e-4;
  c.filter.lowpass_cutoff = 1000.0;
  c.duration = 20.0;
  c.seed = 3;
  const auto pair = run_paired(c);
  REQUIRE(pair.full_band.size() == pair.rotating.size());
  const auto a = dispersions(pair.full_band);
  const auto b = dispersions(pair.rotating);
  CHECK(a.dx1 * a.dx1 == doctest::Approx(b.dx1 * b.dx1).epsilon(0.03));
  CHECK(a.dx2 * a.dx2 == doctest::Approx(b.dx2 * b.dx2).epsilon(0.03));
  const double lag = 5.0 / c.oscillator.damping_rate();
  const auto fa = correlation(pair.full_band, 1, 1, lag).fit;
  const auto fb = correlation(pair.rotating, 1, 1, lag).fit;
  REQUIRE(fa);
  REQUIRE(fb);
  CHECK(fa->gamma == doctest::Approx(fb->gamma).epsilon(0.05));
}

TEST_CASE("run length and sampling") {
  SimConfig c = rotating(FeedbackMode::Off, 0.0, 0.01, 1);
  c.output_sample_period = 1e-3;
  const auto t = run_experiment(c);
  CHECK(t.size() == 10);
  CHECK(t.sample_period == 1e-3);
  c.duration = 1e-3;
  CHECK(run_experiment(c).size() == 1);
}
