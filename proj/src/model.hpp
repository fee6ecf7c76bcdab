#pragma once

// Closed-form description of a single viscously damped mechanical mode:
// susceptibility, thermal force spectrum, quadrature variances under cold
// damping and parametric feedback, and the saturated oscillation amplitude.
//
// Spectral convention used throughout the library: densities are
// double-sided in angular frequency, and a variance is (1/2pi) times the
// integral of the density over the whole real line.

#include <complex>
#include <optional>

namespace mirrorsim {

namespace constants {
inline constexpr double boltzmann = 1.380649e-23;     // J/K (exact, SI 2019)
inline constexpr double speed_of_light = 299792458.0;  // m/s (exact)
inline constexpr double pi = 3.14159265358979323846;
}  // namespace constants

// Resonance angular frequency (rad/s), quality factor and effective mass (kg).
// The damping rate Gamma = Omega_M / Q is derived once and stored.
class OscillatorParams {
 public:
  static OscillatorParams make(double resonance_angular_frequency, double quality_factor,
                               double effective_mass);
  // Convenience for the usual way the mode is quoted (resonance in Hz).
  static OscillatorParams from_frequency(double resonance_hz, double quality_factor,
                                         double effective_mass);

  double resonance_angular_frequency() const noexcept { return omega_; }
  double quality_factor() const noexcept { return q_; }
  double effective_mass() const noexcept { return mass_; }
  double damping_rate() const noexcept { return gamma_; }

  // Omega_M / 2pi = 1859 kHz, M = 230 mg, Q = 44000.
  static OscillatorParams paper();
  // Omega_M / 2pi = 10 kHz, Q = 100, same mass; fast enough for full-band runs.
  static OscillatorParams scaled();

 private:
  OscillatorParams(double omega, double q, double mass);
  double omega_;
  double q_;
  double mass_;
  double gamma_;
};

struct EnvironmentParams {
  double temperature = 300.0;  // K
  double boltzmann_constant = constants::boltzmann;

  double thermal_energy() const noexcept { return boltzmann_constant * temperature; }
};

enum class FeedbackMode { Off, ColdDamp, ParametricViscous, ParametricSpring };

struct FeedbackConfig {
  FeedbackMode mode = FeedbackMode::Off;
  double gain = 0.0;
  double modulation_phase = 0.0;  // rad, phase of the 2 Omega_M drive
  std::optional<double> saturation_force;  // N, absent means unbounded

  bool parametric() const noexcept {
    return mode == FeedbackMode::ParametricViscous || mode == FeedbackMode::ParametricSpring;
  }
};

// Throws Error{Config} when an invariant of FeedbackConfig is violated.
void validate(const FeedbackConfig& feedback);

std::complex<double> susceptibility(const OscillatorParams& p, double omega);
std::complex<double> feedback_susceptibility(const OscillatorParams& p, double gain, double omega);

// S_T = 2 M Gamma k_B T, N^2 s.
double langevin_force_psd(const OscillatorParams& p, const EnvironmentParams& e);

// k_B T / (M Omega_M^2), per quadrature.
double thermal_variance(const OscillatorParams& p, const EnvironmentParams& e);

double effective_temperature(double temperature, double gain);

struct QuadratureDampings {
  double gamma1;  // cooled quadrature, Gamma (1 + g)
  double gamma2;  // amplified quadrature, Gamma (1 - g); <= 0 above threshold
};
QuadratureDampings effective_dampings(const OscillatorParams& p, double gain);

struct QuadratureVariances {
  double var1;
  double var2;
};
// Valid below the oscillation threshold only (0 <= g < 1).
QuadratureVariances parametric_variances(const OscillatorParams& p, const EnvironmentParams& e,
                                         double gain);

double autocorrelation_model(double variance, double gamma_eff, double tau);

struct SaturationEstimate {
  double force;           // N, Omega_M component of a fully modulated square intensity
  double mean_amplitude;  // m, <X2> balancing the intrinsic damping force
};
SaturationEstimate saturation_amplitude(double light_power, const OscillatorParams& p);

}  // namespace mirrorsim
