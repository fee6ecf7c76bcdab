#include "model.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace mirrorsim {

OscillatorParams::OscillatorParams(double omega, double q, double mass)
    : omega_(omega), q_(q), mass_(mass), gamma_(omega / q) {}

OscillatorParams OscillatorParams::make(double omega, double q, double mass) {
  if (!(omega > 0.0) || !std::isfinite(omega))
    fail(ErrorCode::Domain, "resonance angular frequency must be positive and finite");
  if (!(q >= 1.0) || !std::isfinite(q)) fail(ErrorCode::Domain, "quality factor must be >= 1");
  if (!(mass > 0.0) || !std::isfinite(mass))
    fail(ErrorCode::Domain, "effective mass must be positive and finite");
  return OscillatorParams(omega, q, mass);
}

OscillatorParams OscillatorParams::from_frequency(double hz, double q, double mass) {
  return make(2.0 * constants::pi * hz, q, mass);
}

OscillatorParams OscillatorParams::paper() { return from_frequency(1859e3, 44000.0, 230e-6); }

OscillatorParams OscillatorParams::scaled() { return from_frequency(10e3, 100.0, 230e-6); }

void validate(const FeedbackConfig& fb) {
  if (!(fb.gain >= 0.0) || !std::isfinite(fb.gain))
    fail(ErrorCode::Config, "FeedbackConfig: gain must be >= 0");
  if (fb.saturation_force && !(*fb.saturation_force > 0.0))
    fail(ErrorCode::Config, "FeedbackConfig: saturation_force must be > 0 when present");
  if (fb.parametric() && fb.gain >= 1.0 && !fb.saturation_force)
    fail(ErrorCode::Config,
         "FeedbackConfig: parametric gain >= 1 requires saturation_force (variance diverges at "
         "and above the oscillation threshold)");
}

std::complex<double> susceptibility(const OscillatorParams& p, double omega) {
  return feedback_susceptibility(p, 0.0, omega);
}

std::complex<double> feedback_susceptibility(const OscillatorParams& p, double gain, double omega) {
  const double w0 = p.resonance_angular_frequency();
  const std::complex<double> denom(w0 * w0 - omega * omega,
                                   -(1.0 + gain) * p.damping_rate() * omega);
  return 1.0 / (p.effective_mass() * denom);
}

double langevin_force_psd(const OscillatorParams& p, const EnvironmentParams& e) {
  return 2.0 * p.effective_mass() * p.damping_rate() * e.thermal_energy();
}

double thermal_variance(const OscillatorParams& p, const EnvironmentParams& e) {
  const double w0 = p.resonance_angular_frequency();
  return e.thermal_energy() / (p.effective_mass() * w0 * w0);
}

double effective_temperature(double temperature, double gain) {
  if (!(gain > -1.0))
    fail(ErrorCode::Domain, "effective temperature undefined for gain <= -1 (anti-damping)");
  return temperature / (1.0 + gain);
}

QuadratureDampings effective_dampings(const OscillatorParams& p, double gain) {
  const double g = p.damping_rate();
  return {g * (1.0 + gain), g * (1.0 - gain)};
}

QuadratureVariances parametric_variances(const OscillatorParams& p, const EnvironmentParams& e,
                                         double gain) {
  if (!(gain >= 0.0)) fail(ErrorCode::Domain, "parametric gain must be >= 0");
  if (gain >= 1.0)
    fail(ErrorCode::Threshold, "parametric variances are only defined below threshold (g < 1), got g = " +
                                   std::to_string(gain));
  const double v = thermal_variance(p, e);
  const auto d = effective_dampings(p, gain);
  return {v * p.damping_rate() / d.gamma1, v * p.damping_rate() / d.gamma2};
}

double autocorrelation_model(double variance, double gamma_eff, double tau) {
  if (!(tau >= 0.0)) fail(ErrorCode::Domain, "lag must be non-negative");
  return variance * std::exp(-0.5 * gamma_eff * tau);
}

SaturationEstimate saturation_amplitude(double light_power, const OscillatorParams& p) {
  if (!(light_power >= 0.0)) fail(ErrorCode::Domain, "light power must be non-negative");
  const double force = 2.0 * light_power / constants::speed_of_light * (4.0 / constants::pi);
  const double stiffness = p.effective_mass() * p.damping_rate() * p.resonance_angular_frequency();
  return {force, force / stiffness};
}

}  // namespace mirrorsim
