#include <algorithm>
#include <cmath>
#include <complex>

#include "doctest.h"
#include "error.hpp"
#include "model.hpp"

using namespace mirrorsim;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kB = 1.380649e-23;

// (1/2pi) * integral over the whole real line of |chi|^2 S_T, with chi written
// out by hand. omega = Omega + (w/2) tan(theta) flattens the Lorentzian peak.
double fdt_integral(double omega0, double gamma_fb, double mass, double psd) {
  auto integrand = [&](double w) {
    const std::complex<double> d(omega0 * omega0 - w * w, -gamma_fb * w);
    return psd / std::norm(mass * d);
  };
  const double half = 0.5 * gamma_fb;
  const double lo = std::atan(-omega0 / half);
  const double hi = 0.5 * kPi;
  const int n = 400000;  // even
  const double h = (hi - lo) / n;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    double th = lo + k * h;
    if (k == n) th -= 1e-12;
    const double w = omega0 + half * std::tan(th);
    const double jac = half / (std::cos(th) * std::cos(th));
    const double f = integrand(w) * jac;
    sum += (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * f;
  }
  // omega in [0, inf); the integrand is even in omega.
  return 2.0 * sum * h / 3.0 / (2.0 * kPi);
}

// Stationary covariance of dX = A X dt + sqrt(q) dW for a 2x2 drift:
// A P + P A^T + q I = 0, solved for (p11, p12, p22).
void lyapunov(const double a[2][2], double q, double& p11, double& p12, double& p22) {
  // Rows: (1,1), (1,2), (2,2) entries of A P + P A^T.
  double m[3][4] = {{2 * a[0][0], 2 * a[0][1], 0, -q},
                    {a[1][0], a[0][0] + a[1][1], a[0][1], 0},
                    {0, 2 * a[1][0], 2 * a[1][1], -q}};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = 0; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  p11 = m[0][3] / m[0][0];
  p12 = m[1][3] / m[1][1];
  p22 = m[2][3] / m[2][2];
}

}  // namespace

TEST_CASE("paper oscillator constants") {
  const auto p = OscillatorParams::paper();
  CHECK(p.resonance_angular_frequency() == doctest::Approx(2 * kPi * 1859e3).epsilon(1e-15));
  CHECK(p.quality_factor() == 44000.0);
  CHECK(p.effective_mass() == doctest::Approx(230e-6));
  // Gamma / 2pi = 1859 kHz / 44000
  CHECK(p.damping_rate() / (2 * kPi) == doctest::Approx(1859e3 / 44000.0).epsilon(1e-12));
  CHECK(p.damping_rate() / (2 * kPi) == doctest::Approx(42.25).epsilon(1e-3));
}

TEST_CASE("thermal dispersion matches the quoted 36.3e-17 m") {
  const auto p = OscillatorParams::paper();
  const EnvironmentParams e;
  const double dx = std::sqrt(thermal_variance(p, e));
  CHECK(dx == doctest::Approx(36.3e-17).epsilon(0.005));
  const double w = 2 * kPi * 1859e3;
  CHECK(thermal_variance(p, e) == doctest::Approx(kB * 300.0 / (230e-6 * w * w)).epsilon(1e-12));
}

TEST_CASE("susceptibility against the hand-written Lorentzian") {
  const auto p = OscillatorParams::from_frequency(1e4, 100.0, 1e-3);
  const double w0 = 2 * kPi * 1e4, gamma = w0 / 100.0;
  for (double w : {0.0, 0.5 * w0, 0.99 * w0, w0, 1.3 * w0}) {
    const std::complex<double> ref = 1.0 / (1e-3 * std::complex<double>(w0 * w0 - w * w, -gamma * w));
    const auto chi = susceptibility(p, w);
    CHECK(chi.real() == doctest::Approx(ref.real()).epsilon(1e-12).scale(std::abs(ref)));
    CHECK(chi.imag() == doctest::Approx(ref.imag()).epsilon(1e-12).scale(std::abs(ref)));
  }
  // purely imaginary on resonance, |chi| = Q / (M Omega^2)
  const auto r = susceptibility(p, w0);
  CHECK(std::abs(r.real()) < 1e-12 * std::abs(r));
  CHECK(std::abs(r) == doctest::Approx(100.0 / (1e-3 * w0 * w0)).epsilon(1e-12));
  // feedback only widens the resonance
  const auto fb = feedback_susceptibility(p, 3.0, w0);
  CHECK(std::abs(fb) == doctest::Approx(std::abs(r) / 4.0).epsilon(1e-12));
}

TEST_CASE("fluctuation-dissipation closure by quadrature") {
  for (auto p : {OscillatorParams::paper(), OscillatorParams::scaled()}) {
    const EnvironmentParams e;
    const double psd = langevin_force_psd(p, e);
    CHECK(psd == doctest::Approx(2 * p.effective_mass() * p.damping_rate() * kB * 300.0).epsilon(1e-12));
    const double var = fdt_integral(p.resonance_angular_frequency(), p.damping_rate(), p.effective_mass(), psd);
    CHECK(var == doctest::Approx(thermal_variance(p, e)).epsilon(1e-4));

    // Cold damping: same force noise, (1+g) Gamma width -> T / (1+g).
    const double g = 3.0;
    const double cooled =
        fdt_integral(p.resonance_angular_frequency(), (1 + g) * p.damping_rate(), p.effective_mass(), psd);
    const double t_eff = 300.0 * cooled / thermal_variance(p, e);
    CHECK(t_eff == doctest::Approx(effective_temperature(300.0, g)).epsilon(1e-4));
  }
}

TEST_CASE("effective temperature under cold damping") {
  CHECK(effective_temperature(300.0, 3.0) == doctest::Approx(75.0));
  CHECK(effective_temperature(300.0, 0.0) == doctest::Approx(300.0));
  // width quoted as (1+g) Gamma / 2pi ~ 170 Hz at g = 3
  const auto d = effective_dampings(OscillatorParams::paper(), 3.0);
  CHECK(d.gamma1 / (2 * kPi) == doctest::Approx(170.0).epsilon(0.01));
  CHECK_THROWS_AS(effective_temperature(300.0, -1.0), Error);
}

TEST_CASE("parametric variances from the stationary Lyapunov equation") {
  const auto p = OscillatorParams::paper();
  const EnvironmentParams e;
  const double v = thermal_variance(p, e), gamma = p.damping_rate();
  for (double g : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9}) {
    // Averaged quadrature drift: cooled axis relaxes at (1+g) Gamma / 2,
    // amplified at (1-g) Gamma / 2; white drive keeps V_th at g = 0.
    const double a[2][2] = {{-(1 + g) * gamma / 2, 0.0}, {0.0, -(1 - g) * gamma / 2}};
    double p11, p12, p22;
    lyapunov(a, gamma * v, p11, p12, p22);
    const auto pv = parametric_variances(p, e, g);
    CHECK(pv.var1 == doctest::Approx(p11).epsilon(1e-12));
    CHECK(pv.var2 == doctest::Approx(p22).epsilon(1e-12));
    CHECK(std::abs(p12) < 1e-12 * v);
    const auto d = effective_dampings(p, g);
    CHECK(d.gamma1 == doctest::Approx((1 + g) * gamma));
    CHECK(d.gamma2 == doctest::Approx((1 - g) * gamma));
  }
  // quoted dispersion ratios at g = 0.8
  const auto pv = parametric_variances(p, e, 0.8);
  CHECK(std::sqrt(pv.var1 / v) == doctest::Approx(0.745).epsilon(0.001));
  CHECK(std::sqrt(pv.var2 / v) == doctest::Approx(2.236).epsilon(0.001));
  // squeezing limit approaches one half
  CHECK(parametric_variances(p, e, 0.999).var1 / v == doctest::Approx(0.5).epsilon(0.001));
}

TEST_CASE("parametric variances reject g >= 1") {
  const auto p = OscillatorParams::paper();
  try {
    (void)parametric_variances(p, EnvironmentParams{}, 1.0);
    FAIL("expected a threshold error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Threshold);
  }
}

TEST_CASE("autocorrelation model") {
  CHECK(autocorrelation_model(2.0, 4.0, 0.0) == doctest::Approx(2.0));
  CHECK(autocorrelation_model(2.0, 4.0, 0.5) == doctest::Approx(2.0 * std::exp(-1.0)));
  CHECK_THROWS_AS(autocorrelation_model(1.0, 1.0, -1.0), Error);
}

TEST_CASE("saturation amplitude at half a watt") {
  const auto p = OscillatorParams::paper();
  const auto s = saturation_amplitude(0.5, p);
  const double force = 2 * 0.5 / 299792458.0 * 4 / kPi;
  CHECK(s.force == doctest::Approx(force).epsilon(1e-12));
  CHECK(s.mean_amplitude ==
        doctest::Approx(force / (230e-6 * p.damping_rate() * 2 * kPi * 1859e3)).epsilon(1e-12));
  CHECK(s.mean_amplitude == doctest::Approx(6e-15).epsilon(0.15));
  CHECK_THROWS_AS(saturation_amplitude(-1.0, p), Error);
}

TEST_CASE("parameter and feedback invariants") {
  CHECK_THROWS_AS(OscillatorParams::make(-1.0, 100.0, 1e-3), Error);
  CHECK_THROWS_AS(OscillatorParams::make(1e3, 0.5, 1e-3), Error);
  CHECK_THROWS_AS(OscillatorParams::make(1e3, 100.0, 0.0), Error);

  FeedbackConfig fb;
  fb.mode = FeedbackMode::ParametricViscous;
  fb.gain = 1.2;
  try {
    validate(fb);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("FeedbackConfig") != std::string::npos);
  }
  fb.saturation_force = 4e-9;
  CHECK_NOTHROW(validate(fb));
  fb.gain = -0.1;
  CHECK_THROWS_AS(validate(fb), Error);
}

TEST_CASE("imaginary part of the inverse susceptibility closes the FDT on a grid") {
  const auto p = OscillatorParams::paper();
  const EnvironmentParams e;
  const double w0 = p.resonance_angular_frequency(), gamma = p.damping_rate();
  const double target = 2 * p.effective_mass() * gamma * kB * 300.0;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double w = w0 - 5 * gamma + 10 * gamma * k / 999.0;
    const double s = -(2 * kB * 300.0 / w) * (1.0 / susceptibility(p, w)).imag();
    worst = std::max(worst, std::abs(s / target - 1.0));
  }
  CHECK(worst < 1e-6);
  CHECK(langevin_force_psd(p, e) == doctest::Approx(target).epsilon(1e-6));
}

TEST_CASE("quadrature spectrum integrates to the thermal variance") {
  // S_X1(w) = 2 |chi(Omega + w)|^2 S_T near resonance; cutoff at 100 Gamma.
  const auto p = OscillatorParams::paper();
  const EnvironmentParams e;
  const double w0 = p.resonance_angular_frequency(), gamma = p.damping_rate();
  const double st = langevin_force_psd(p, e);
  const int n = 200000;
  const double a = -100 * gamma, h = 200 * gamma / n;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double f = 2.0 * std::norm(susceptibility(p, w0 + a + k * h)) * st;
    sum += (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * f;
  }
  const double var = sum * h / 3.0 / (2 * kPi);
  CHECK(var == doctest::Approx(thermal_variance(p, e)).epsilon(0.005));
}

TEST_CASE("cold damping variance equals a thermal variance at T_eff") {
  const auto p = OscillatorParams::paper();
  for (double g : {0.5, 1.0, 3.0, 10.0}) {
    EnvironmentParams hot, cold;
    cold.temperature = effective_temperature(300.0, g);
    CHECK(thermal_variance(p, cold) == doctest::Approx(thermal_variance(p, hot) / (1 + g)).epsilon(1e-14));
  }
}

TEST_CASE("parametric squeezing floor") {
  const auto p = OscillatorParams::paper();
  const EnvironmentParams e;
  const double v = thermal_variance(p, e);
  double prev = 1.0;
  for (double g : {0.9, 0.99, 0.999}) {
    const double r = parametric_variances(p, e, g).var1 / v;
    CHECK(r < prev);
    CHECK(r > 0.5);
    prev = r;
  }
  CHECK(prev == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("effective dampings sum to twice the intrinsic rate") {
  const auto p = OscillatorParams::paper();
  for (double g : {0.0, 0.3, 0.9, 1.0, 2.5}) {
    const auto d = effective_dampings(p, g);
    CHECK(d.gamma1 + d.gamma2 == doctest::Approx(2 * p.damping_rate()).epsilon(1e-15));
  }
}
