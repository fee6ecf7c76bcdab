#pragma once

// Lock-in chain: resonant bandpass at Omega_M, mixing with two square
// references in quadrature, second-order low-pass per channel, decimation.
// Filters are trapezoidal (bilinear, pre-warped) state-variable sections run
// at the input rate.

#include <cstdint>
#include <span>
#include <vector>

#include "readout.hpp"
#include "trace.hpp"

namespace mirrorsim {

struct FilterSpec {
  double bandpass_center = 0.0;  // rad/s
  double bandpass_width = 10e3;  // Hz, -3 dB full width
  double lowpass_cutoff = 460.0;  // Hz
  int lowpass_order = 2;
};

void validate(const FilterSpec& spec);

struct DemodConfig {
  double reference_frequency = 0.0;  // rad/s
  double reference_phase = 0.0;      // rad
  // Output scale; the square-wave fundamental gives 2/pi at DC, so pi/2 for an
  // ideal chain. calibrate_gain() measures the sampled chain instead.
  double gain_correction = 1.5707963267948966;
  double meters_per_radian = 1.0;  // input scaling, lambda / (8 F) for phase traces
  double output_sample_period = 0.0;  // s; 0 keeps every input sample
  double channel_mismatch = 0.0;      // relative gain error of the second channel
};

// Trapezoidal state-variable biquad (Zavalishin/Simper form).
class SvfFilter {
 public:
  // Butterworth low-pass, -3 dB at cutoff_hz.
  static SvfFilter lowpass(double cutoff_hz, double sample_rate);
  // Unity-peak resonant bandpass centred at center_hz with -3 dB full width width_hz.
  static SvfFilter bandpass(double center_hz, double width_hz, double sample_rate);

  double process(double in) noexcept {
    const double v3 = in - ic2_;
    const double v1 = a1_ * ic1_ + a2_ * v3;
    const double v2 = ic2_ + a2_ * ic1_ + a3_ * v3;
    ic1_ = 2.0 * v1 - ic1_;
    ic2_ = 2.0 * v2 - ic2_;
    return bandpass_ ? k_ * v1 : v2;
  }
  void reset() noexcept { ic1_ = ic2_ = 0.0; }

 private:
  SvfFilter(double g, double k, bool bandpass);
  double k_;
  double a1_, a2_, a3_;
  double ic1_ = 0.0, ic2_ = 0.0;
  bool bandpass_;
};

// +1/-1 square wave, sign of cos(omega t - phase), averaged over one sample
// period centred on t (0 keeps the bare sign).
double square_reference(double t, double omega, double phase, double sample_period = 0.0) noexcept;

std::vector<double> bandpass(std::span<const double> signal, double sample_period,
                             const FilterSpec& spec);
std::vector<double> lowpass2(std::span<const double> signal, double sample_period,
                             const FilterSpec& spec);
// Sample n is taken at time n * sample_period.
std::vector<double> mix_square(std::span<const double> signal, double sample_period,
                               const DemodConfig& cfg, double phase_offset);

// Streaming demodulator; push one input sample at a time, read a quadrature
// pair every `decimation()` samples.
class Demodulator {
 public:
  Demodulator(const FilterSpec& spec, const DemodConfig& cfg, double sample_period);

  // Returns true when a decimated output became available.
  bool push(double sample) noexcept {
    const double t = static_cast<double>(index_) * sample_period_;
    const double b = bandpass_.process(sample * cfg_.meters_per_radian);
    const double i = lowpass_i_.process(b * square_reference(t, omega_, phase_i_, sample_period_));
    const double q = lowpass_q_.process(b * square_reference(t, omega_, phase_q_, sample_period_));
    ++index_;
    if (++countdown_ < decimation_) return false;
    countdown_ = 0;
    last_ = {gain_i_ * i, gain_q_ * q};
    return true;
  }

  QuadraturePoint output() const noexcept { return last_; }
  std::size_t decimation() const noexcept { return decimation_; }
  std::uint64_t samples_seen() const noexcept { return index_; }

 private:
  DemodConfig cfg_;
  double sample_period_;
  double omega_;
  double phase_i_, phase_q_;
  double gain_i_, gain_q_;
  SvfFilter bandpass_, lowpass_i_, lowpass_q_;
  std::size_t decimation_;
  std::size_t countdown_ = 0;
  std::uint64_t index_ = 0;
  QuadraturePoint last_{};
};

// Drives the chain with injected tones A cos(Omega t) and A sin(Omega t) and
// returns the gain that maps the first back to X1 = A. Throws Calibration when
// the two channels disagree by more than 1 %.
double calibrate_gain(const FilterSpec& spec, DemodConfig cfg, double sample_period);

QuadratureTrace demodulate(const PhaseTrace& phase, const FilterSpec& spec, const DemodConfig& cfg);

// White-noise power bandwidth of the whole chain (s^-1): output variance of
// one channel per unit double-sided input density, measured by simulation.
double measure_noise_bandwidth(const FilterSpec& spec, double duration_per_cutoff = 1000.0,
                               std::uint64_t seed = 0x6e6f697365ULL);

// delta_x_min * sqrt(B_eff) with B_eff from measure_noise_bandwidth.
double noise_equivalent_displacement(const FilterSpec& spec, double delta_x_min);

// Sample rate used when the chain is exercised on its own (12 per carrier period).
double chain_sample_period(const FilterSpec& spec);

}  // namespace mirrorsim
