#pragma once

// Homodyne readout of the end-mirror displacement: phase gain 8F/lambda,
// white quantum phase noise at a displacement-equivalent floor, and the
// laser-frequency-modulation calibration from volts to meters.

#include <cstdint>
#include <span>
#include <vector>

#include "rng.hpp"

namespace mirrorsim {

struct OpticalParams {
  double finesse = 37000.0;
  double wavelength = 810e-9;          // m
  double cavity_length = 1e-3;         // m
  double sensitivity_floor = 2.8e-19;  // m/sqrt(Hz)

  // d(phase)/dx at the cavity resonance, rad/m.
  double phase_gain() const noexcept { return 8.0 * finesse / wavelength; }
  double optical_frequency() const noexcept;
};

void validate(const OpticalParams& optics);

struct PhaseTrace {
  double sample_period = 0.0;  // s
  std::vector<double> samples;  // rad
  bool includes_noise = false;
};

// The noise floor is treated as a double-sided density, so one sample of
// displacement-equivalent noise has variance sensitivity_floor^2 / sample_period.
// `resonance_angular_frequency` only enforces the >= 10 samples per
// mechanical period requirement.
PhaseTrace displacement_to_phase(std::span<const double> displacement, double sample_period,
                                 const OpticalParams& optics, double resonance_angular_frequency,
                                 Rng& rng, bool with_noise);

// Streaming form of displacement_to_phase, one sample at a time.
class PhaseReadout {
 public:
  PhaseReadout(const OpticalParams& optics, double sample_period, bool with_noise,
               std::uint64_t seed);

  double operator()(double displacement) {
    double phase = gain_ * displacement;
    if (with_noise_) phase += noise_sigma_ * rng_.gaussian();
    return phase;
  }

 private:
  double gain_;
  double noise_sigma_;
  bool with_noise_;
  Rng rng_;
};

// Displacement equivalent to a laser frequency step: L * dnu / nu.
double frequency_calibration(double delta_nu, const OpticalParams& optics);

// Linear volts <-> meters map fixed by one (frequency step, observed voltage) pair.
class VoltageCalibration {
 public:
  static VoltageCalibration from_reference(double delta_nu, double volts,
                                           const OpticalParams& optics);
  // 200 Hz modulation read as 27 mV.
  static VoltageCalibration paper(const OpticalParams& optics);

  double volts_to_meters(double volts) const noexcept { return volts * meters_per_volt_; }
  double meters_to_volts(double meters) const noexcept { return meters / meters_per_volt_; }
  double meters_per_volt() const noexcept { return meters_per_volt_; }
  double volt_per_meter() const noexcept { return 1.0 / meters_per_volt_; }

 private:
  explicit VoltageCalibration(double mpv) : meters_per_volt_(mpv) {}
  double meters_per_volt_;
};

}  // namespace mirrorsim
