#pragma once

// Langevin integration of the mechanical mode, either in the laboratory frame
// (position/velocity, resolved at the carrier) or directly for the slow
// quadratures in the frame rotating at Omega_M.

#include <cstdint>
#include <optional>

#include "demodulation.hpp"
#include "model.hpp"
#include "readout.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace mirrorsim {

enum class Integrator { FullBand, RotatingFrame };

struct FullBandState {
  double position = 0.0;  // m
  double velocity = 0.0;  // m/s
  double time = 0.0;      // s
  std::uint64_t step = 0;
};

struct RotatingState {
  double x1 = 0.0;  // m
  double x2 = 0.0;  // m
  double time = 0.0;
  std::uint64_t step = 0;
};

struct SimConfig {
  Integrator integrator = Integrator::RotatingFrame;
  double time_step = 1e-5;             // s
  double duration = 60.0;              // s, recorded span after warm-up
  double output_sample_period = 5e-4;  // s
  std::uint64_t seed = 1;
  OscillatorParams oscillator = OscillatorParams::paper();
  EnvironmentParams environment{};
  FeedbackConfig feedback{};

  // Readout chain used by the full-band integrator; the bandpass is always
  // centred on the mechanical resonance.
  OpticalParams optics{};
  FilterSpec filter{};
  bool phase_noise = true;

  // Starting point (rotating frame; mapped to x, v for the full band).
  double initial_x1 = 0.0;
  double initial_x2 = 0.0;
  // Overrides the default warm-up of 10 / Gamma_slowest.
  std::optional<double> warmup;
};

// Throws Error{Config} naming the violated invariant.
void validate(const SimConfig& cfg);

// Largest time step allowed by the integrator's stability/accuracy bound.
double max_time_step(const SimConfig& cfg);

// Default warm-up: 10 / Gamma_slowest (plus filter settling for the full band).
double default_warmup(const SimConfig& cfg);

// Zero-mean Gaussian impulse (N s) with variance 2 M Gamma k_B T dt.
double generate_langevin_increment(Rng& rng, const OscillatorParams& p, const EnvironmentParams& e,
                                   double dt);

// Instantaneous laboratory-frame feedback force (N), clamped to
// +-saturation_force when one is configured.
double feedback_force(const FullBandState& state, const SimConfig& cfg, double t);

struct ForceQuadratures {
  double f1 = 0.0;  // N, cos(Omega_M t) component
  double f2 = 0.0;  // N, sin(Omega_M t) component
  bool saturated = false;
};

// Resonant part of the feedback force seen by the slow quadratures. Saturation
// limits the amplitude of the force phasor (f1, f2) to saturation_force.
ForceQuadratures feedback_force_quadratures(const RotatingState& state, const SimConfig& cfg);

// Semi-implicit (kick-drift) Euler step with a Langevin impulse.
FullBandState step_full_band(const FullBandState& state, const SimConfig& cfg, Rng& rng);

// Exact Ornstein-Uhlenbeck update while the feedback is linear; Euler-Maruyama
// with the saturated force once the saturation bound is reached.
RotatingState step_rotating(const RotatingState& state, const SimConfig& cfg, Rng& rng);

// Warm-up, then floor(duration / output_sample_period) samples. The full band
// goes through readout + demodulation; the rotating frame is sampled directly.
QuadratureTrace run_experiment(const SimConfig& cfg);

// Same, but returns the rotating-frame trace after passing it through the
// baseband low-pass of cfg.filter (run at the integrator rate, then decimated).
// This is what an ideal lock-in would report for the rotating-frame motion.
QuadratureTrace run_rotating_filtered(const SimConfig& cfg);

// A full-band run and a rotating-frame run driven by the same Langevin force
// record: each full-band impulse J at time t is projected onto the slow
// quadratures as (-sin, cos)(Omega_M t) J / (M Omega_M). The rotating trace
// passes through the same low-pass and decimation as the demodulated one, so
// the two differ only by integrator and readout effects. Needs a full-band
// configuration without saturation.
struct PairedTraces {
  QuadratureTrace full_band;
  QuadratureTrace rotating;
};
PairedTraces run_paired(const SimConfig& cfg);

// Precomputed full-band stepper used by run_experiment.
class FullBandIntegrator {
 public:
  FullBandIntegrator(const SimConfig& cfg, double dt);
  // Returns the Langevin impulse applied during the step (N s).
  double step(FullBandState& s, Rng& rng);
  double dt() const noexcept { return dt_; }

 private:
  const SimConfig& cfg_;
  double dt_;
  double omega2_;
  double gamma_;
  double inv_mass_;
  double impulse_sigma_;
};

// Precomputed rotating-frame stepper used by run_experiment.
class RotatingIntegrator {
 public:
  RotatingIntegrator(const SimConfig& cfg, double dt);
  void step(RotatingState& s, Rng& rng);
  // Linear step with externally supplied displacement increments in place of
  // the thermal kicks.
  void step_driven(RotatingState& s, double dx1, double dx2);
  double dt() const noexcept { return dt_; }

 private:
  void step_saturated(RotatingState& s, double n1, double n2);

  const SimConfig& cfg_;
  double dt_;
  double gamma_;
  double force_scale_;  // N/m, g M Gamma Omega_M
  double drive_scale_;  // 1 / (2 M Omega_M)
  double sigma_;        // diffusion coefficient, m/sqrt(s)
  bool has_feedback_;
  std::optional<double> fmax_;
  // Feedback coupling matrix K (force = force_scale K X) and the eigenbasis of
  // the symmetric linear drift.
  double k11_, k12_, k21_, k22_;
  double basis_c_, basis_s_;   // rotation into eigen-coordinates
  double decay_[2];            // per-step decay factor
  double kick_[2];             // per-step noise std
};

}  // namespace mirrorsim
