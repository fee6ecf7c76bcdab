#include "readout.hpp"

#include <cmath>

#include "error.hpp"
#include "model.hpp"

namespace mirrorsim {

double OpticalParams::optical_frequency() const noexcept {
  return constants::speed_of_light / wavelength;
}

void validate(const OpticalParams& o) {
  if (!(o.finesse >= 1.0)) fail(ErrorCode::Config, "OpticalParams: finesse must be >= 1");
  if (!(o.wavelength > 0.0)) fail(ErrorCode::Config, "OpticalParams: wavelength must be > 0");
  if (!(o.cavity_length > 0.0)) fail(ErrorCode::Config, "OpticalParams: cavity_length must be > 0");
  if (!(o.sensitivity_floor > 0.0))
    fail(ErrorCode::Config, "OpticalParams: sensitivity_floor must be > 0");
}

PhaseTrace displacement_to_phase(std::span<const double> x, double sample_period,
                                 const OpticalParams& optics, double omega_m, Rng& rng,
                                 bool with_noise) {
  validate(optics);
  if (!(sample_period > 0.0)) fail(ErrorCode::Config, "sample period must be > 0");
  const double rate = 1.0 / sample_period;
  if (rate < 10.0 * omega_m / (2.0 * constants::pi) * (1.0 - 1e-12))
    fail(ErrorCode::Config, "displacement trace sampled below 10 samples per mechanical period");

  PhaseTrace out;
  out.sample_period = sample_period;
  out.includes_noise = with_noise;
  out.samples.reserve(x.size());
  const double gain = optics.phase_gain();
  const double sigma = gain * optics.sensitivity_floor * std::sqrt(rate);
  for (double xi : x) {
    double phase = gain * xi;
    if (with_noise) phase += sigma * rng.gaussian();
    out.samples.push_back(phase);
  }
  return out;
}

PhaseReadout::PhaseReadout(const OpticalParams& optics, double sample_period, bool with_noise,
                           std::uint64_t seed)
    : gain_(optics.phase_gain()),
      noise_sigma_(optics.phase_gain() * optics.sensitivity_floor / std::sqrt(sample_period)),
      with_noise_(with_noise),
      rng_(seed) {
  validate(optics);
}

double frequency_calibration(double delta_nu, const OpticalParams& optics) {
  return optics.cavity_length * delta_nu / optics.optical_frequency();
}

VoltageCalibration VoltageCalibration::from_reference(double delta_nu, double volts,
                                                      const OpticalParams& optics) {
  if (!(volts != 0.0) || !(delta_nu != 0.0))
    fail(ErrorCode::Calibration, "calibration reference must be non-zero");
  return VoltageCalibration(frequency_calibration(delta_nu, optics) / volts);
}

VoltageCalibration VoltageCalibration::paper(const OpticalParams& optics) {
  return from_reference(200.0, 27e-3, optics);
}

}  // namespace mirrorsim
