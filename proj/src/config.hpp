#pragma once

// Flat key/value experiment configuration.
//
//   # comment
//   oscillator.frequency = 1859e3
//   feedback.mode = cold_damp
//
// Keys are namespaced oscillator.*, environment.*, feedback.*, sim.*, optics.*
// and filter.*; values are SI. `sim.preset` is applied before any other key
// regardless of where it appears in the file.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simulator.hpp"

namespace mirrorsim {

struct Diagnostic {
  std::size_t line = 0;  // 0 when not tied to a file line
  std::string key;
  std::string message;

  std::string str() const;
};

struct ExperimentConfig {
  std::string preset = "paper";
  double oscillator_frequency = 1859e3;  // Hz
  double quality_factor = 44000.0;
  double effective_mass = 230e-6;  // kg
  double temperature = 300.0;      // K

  FeedbackConfig feedback{};
  std::optional<double> light_power;  // W; sets the saturation force when given
  std::vector<double> gain_list{0.0, 0.2, 0.4, 0.6, 0.8, 0.9};

  Integrator integrator = Integrator::RotatingFrame;
  std::optional<double> time_step;  // s; absent means the largest allowed step
  double duration = 60.0;
  double output_sample_period = 5e-4;
  double initial_x1 = 0.0;
  double initial_x2 = 0.0;
  std::optional<double> warmup;
  double histogram_full_scale = 2e-15;
  double correlation_max_lag = 0.05;
  std::size_t ensemble_size = 20;

  OpticalParams optics{};
  bool phase_noise = true;
  double bandpass_width = 10e3;
  double lowpass_cutoff = 460.0;
  int lowpass_order = 2;
  double channel_mismatch = 0.0;

  // Keys given explicitly (by file or set()), as opposed to preset defaults.
  std::set<std::string> explicit_keys;

  static ExperimentConfig make_preset(std::string_view name);  // "paper" or "scaled"

  // Throws Error{Config} for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  bool is_explicit(std::string_view key) const { return explicit_keys.count(std::string(key)) != 0; }

  OscillatorParams oscillator() const;
  FilterSpec filter() const;
  // Fully resolved simulation configuration (auto time step, saturation force).
  SimConfig resolve(std::uint64_t seed) const;

  // Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> listing() const;
};

const std::vector<std::string>& known_keys();

struct ParsedConfig {
  ExperimentConfig config;
  std::vector<Diagnostic> diagnostics;  // parse errors and invariant violations
};

ParsedConfig parse_config(std::string_view text);
// Throws Error{Io} when the file cannot be read.
ParsedConfig load_config(const std::string& path);

// Invariant checks on an assembled configuration; empty when valid.
std::vector<Diagnostic> check(const ExperimentConfig& cfg);

std::string to_string(FeedbackMode mode);
std::string to_string(Integrator integrator);

}  // namespace mirrorsim
