#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "error.hpp"

namespace mirrorsim {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorCode::Config, std::string(key) + ": cannot parse '" + std::string(value) + "' as " +
                              std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

std::optional<double> parse_optional(std::string_view key, std::string_view v, std::string_view word) {
  if (v == word) return std::nullopt;
  return parse_double(key, v);
}

long long parse_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (item.empty()) bad_value(key, v, "a comma-separated list of numbers");
    out.push_back(parse_double(key, item));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a non-empty list");
  return out;
}

FeedbackMode parse_mode(std::string_view key, std::string_view v) {
  if (v == "off") return FeedbackMode::Off;
  if (v == "cold_damp") return FeedbackMode::ColdDamp;
  if (v == "parametric_viscous") return FeedbackMode::ParametricViscous;
  if (v == "parametric_spring") return FeedbackMode::ParametricSpring;
  bad_value(key, v, "one of off, cold_damp, parametric_viscous, parametric_spring");
}

Integrator parse_integrator(std::string_view key, std::string_view v) {
  if (v == "full_band") return Integrator::FullBand;
  if (v == "rotating_frame") return Integrator::RotatingFrame;
  bad_value(key, v, "full_band or rotating_frame");
}

std::string opt(const std::optional<double>& v, const char* word) { return v ? fmt(*v) : word; }

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct KeySpec {
  const char* name;
  Setter set;
  Getter get;
};

const std::vector<KeySpec>& key_table() {
  using C = ExperimentConfig;
  using SV = std::string_view;
  static const std::vector<KeySpec> table = {
      {"sim.preset", [](C& c, SV, SV v) { c = C::make_preset(v); }, [](const C& c) { return c.preset; }},
      {"oscillator.frequency", [](C& c, SV k, SV v) { c.oscillator_frequency = parse_double(k, v); },
       [](const C& c) { return fmt(c.oscillator_frequency); }},
      {"oscillator.quality_factor", [](C& c, SV k, SV v) { c.quality_factor = parse_double(k, v); },
       [](const C& c) { return fmt(c.quality_factor); }},
      {"oscillator.mass", [](C& c, SV k, SV v) { c.effective_mass = parse_double(k, v); },
       [](const C& c) { return fmt(c.effective_mass); }},
      {"environment.temperature", [](C& c, SV k, SV v) { c.temperature = parse_double(k, v); },
       [](const C& c) { return fmt(c.temperature); }},
      {"feedback.mode", [](C& c, SV k, SV v) { c.feedback.mode = parse_mode(k, v); },
       [](const C& c) { return to_string(c.feedback.mode); }},
      {"feedback.gain", [](C& c, SV k, SV v) { c.feedback.gain = parse_double(k, v); },
       [](const C& c) { return fmt(c.feedback.gain); }},
      {"feedback.modulation_phase", [](C& c, SV k, SV v) { c.feedback.modulation_phase = parse_double(k, v); },
       [](const C& c) { return fmt(c.feedback.modulation_phase); }},
      {"feedback.saturation_force",
       [](C& c, SV k, SV v) { c.feedback.saturation_force = parse_optional(k, v, "none"); },
       [](const C& c) { return opt(c.feedback.saturation_force, "none"); }},
      {"feedback.light_power", [](C& c, SV k, SV v) { c.light_power = parse_optional(k, v, "none"); },
       [](const C& c) { return opt(c.light_power, "none"); }},
      {"feedback.gain_list", [](C& c, SV k, SV v) { c.gain_list = parse_list(k, v); },
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.gain_list.size(); ++i) s += (i ? ", " : "") + fmt(c.gain_list[i]);
         return s;
       }},
      {"sim.integrator", [](C& c, SV k, SV v) { c.integrator = parse_integrator(k, v); },
       [](const C& c) { return to_string(c.integrator); }},
      {"sim.time_step", [](C& c, SV k, SV v) { c.time_step = parse_optional(k, v, "auto"); },
       [](const C& c) { return opt(c.time_step, "auto"); }},
      {"sim.duration", [](C& c, SV k, SV v) { c.duration = parse_double(k, v); },
       [](const C& c) { return fmt(c.duration); }},
      {"sim.output_sample_period", [](C& c, SV k, SV v) { c.output_sample_period = parse_double(k, v); },
       [](const C& c) { return fmt(c.output_sample_period); }},
      {"sim.initial_x1", [](C& c, SV k, SV v) { c.initial_x1 = parse_double(k, v); },
       [](const C& c) { return fmt(c.initial_x1); }},
      {"sim.initial_x2", [](C& c, SV k, SV v) { c.initial_x2 = parse_double(k, v); },
       [](const C& c) { return fmt(c.initial_x2); }},
      {"sim.warmup", [](C& c, SV k, SV v) { c.warmup = parse_optional(k, v, "auto"); },
       [](const C& c) { return opt(c.warmup, "auto"); }},
      {"sim.histogram_full_scale", [](C& c, SV k, SV v) { c.histogram_full_scale = parse_double(k, v); },
       [](const C& c) { return fmt(c.histogram_full_scale); }},
      {"sim.correlation_max_lag", [](C& c, SV k, SV v) { c.correlation_max_lag = parse_double(k, v); },
       [](const C& c) { return fmt(c.correlation_max_lag); }},
      {"sim.ensemble_size",
       [](C& c, SV k, SV v) {
         const auto n = parse_int(k, v);
         if (n < 1) bad_value(k, v, "a positive integer");
         c.ensemble_size = static_cast<std::size_t>(n);
       },
       [](const C& c) { return std::to_string(c.ensemble_size); }},
      {"optics.finesse", [](C& c, SV k, SV v) { c.optics.finesse = parse_double(k, v); },
       [](const C& c) { return fmt(c.optics.finesse); }},
      {"optics.wavelength", [](C& c, SV k, SV v) { c.optics.wavelength = parse_double(k, v); },
       [](const C& c) { return fmt(c.optics.wavelength); }},
      {"optics.cavity_length", [](C& c, SV k, SV v) { c.optics.cavity_length = parse_double(k, v); },
       [](const C& c) { return fmt(c.optics.cavity_length); }},
      {"optics.sensitivity_floor", [](C& c, SV k, SV v) { c.optics.sensitivity_floor = parse_double(k, v); },
       [](const C& c) { return fmt(c.optics.sensitivity_floor); }},
      {"optics.phase_noise", [](C& c, SV k, SV v) { c.phase_noise = parse_bool(k, v); },
       [](const C& c) { return std::string(c.phase_noise ? "true" : "false"); }},
      {"filter.bandpass_width", [](C& c, SV k, SV v) { c.bandpass_width = parse_double(k, v); },
       [](const C& c) { return fmt(c.bandpass_width); }},
      {"filter.lowpass_cutoff", [](C& c, SV k, SV v) { c.lowpass_cutoff = parse_double(k, v); },
       [](const C& c) { return fmt(c.lowpass_cutoff); }},
      {"filter.lowpass_order",
       [](C& c, SV k, SV v) { c.lowpass_order = static_cast<int>(parse_int(k, v)); },
       [](const C& c) { return std::to_string(c.lowpass_order); }},
      {"filter.channel_mismatch", [](C& c, SV k, SV v) { c.channel_mismatch = parse_double(k, v); },
       [](const C& c) { return fmt(c.channel_mismatch); }},
  };
  return table;
}

const KeySpec* find_key(std::string_view key) {
  for (const auto& k : key_table())
    if (key == k.name) return &k;
  return nullptr;
}

}  // namespace

std::string Diagnostic::str() const {
  std::string s;
  if (line) s += "line " + std::to_string(line) + ": ";
  if (!key.empty()) s += key + ": ";
  return s + message;
}

std::string to_string(FeedbackMode mode) {
  switch (mode) {
    case FeedbackMode::Off: return "off";
    case FeedbackMode::ColdDamp: return "cold_damp";
    case FeedbackMode::ParametricViscous: return "parametric_viscous";
    case FeedbackMode::ParametricSpring: return "parametric_spring";
  }
  return "?";
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::FullBand ? "full_band" : "rotating_frame";
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& spec : key_table()) k.emplace_back(spec.name);
    return k;
  }();
  return keys;
}

ExperimentConfig ExperimentConfig::make_preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "paper") return c;
  if (name == "scaled") {
    c.preset = "scaled";
    c.oscillator_frequency = 10e3;
    c.quality_factor = 100.0;
    c.integrator = Integrator::FullBand;
    c.time_step = 1e-6;
    c.output_sample_period = 1e-4;
    c.lowpass_cutoff = 2.5e3;
    c.histogram_full_scale = 4e-13;
    return c;
  }
  fail(ErrorCode::Config, "sim.preset: unknown preset '" + std::string(name) + "' (paper or scaled)");
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto* spec = find_key(key);
  if (!spec) fail(ErrorCode::Config, "unknown key '" + std::string(key) + "'");
  auto keep = explicit_keys;
  spec->set(*this, key, trim(value));
  if (key == "sim.preset") keep.clear();
  explicit_keys = std::move(keep);
  explicit_keys.insert(std::string(key));
}

OscillatorParams ExperimentConfig::oscillator() const {
  return OscillatorParams::from_frequency(oscillator_frequency, quality_factor, effective_mass);
}

FilterSpec ExperimentConfig::filter() const {
  FilterSpec f;
  f.bandpass_center = 2.0 * constants::pi * oscillator_frequency;
  f.bandpass_width = bandpass_width;
  f.lowpass_cutoff = lowpass_cutoff;
  f.lowpass_order = lowpass_order;
  return f;
}

SimConfig ExperimentConfig::resolve(std::uint64_t seed) const {
  SimConfig s;
  s.integrator = integrator;
  s.duration = duration;
  s.output_sample_period = output_sample_period;
  s.seed = seed;
  s.oscillator = oscillator();
  s.environment.temperature = temperature;
  s.feedback = feedback;
  if (light_power && !feedback.saturation_force)
    s.feedback.saturation_force = saturation_amplitude(*light_power, s.oscillator).force;
  s.optics = optics;
  s.filter = filter();
  s.phase_noise = phase_noise;
  s.initial_x1 = initial_x1;
  s.initial_x2 = initial_x2;
  s.warmup = warmup;
  s.time_step = time_step ? *time_step : std::min(max_time_step(s), output_sample_period);
  return s;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::listing() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : key_table()) out.emplace_back(k.name, k.get(*this));
  return out;
}

ParsedConfig parse_config(std::string_view text) {
  struct Entry {
    std::size_t line;
    std::string key, value;
  };
  ParsedConfig result;
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      result.diagnostics.push_back({line_no, "", "expected 'key = value', got '" + std::string(line) + "'"});
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!find_key(key)) {
      result.diagnostics.push_back({line_no, key, "unknown key"});
      continue;
    }
    if (value.empty()) {
      result.diagnostics.push_back({line_no, key, "missing value"});
      continue;
    }
    if (auto it = seen.find(key); it != seen.end()) {
      result.diagnostics.push_back(
          {line_no, key, "duplicate key (first set on line " + std::to_string(it->second) + ")"});
      continue;
    }
    seen[key] = line_no;
    entries.push_back({line_no, key, value});
  }

  // The preset resets everything, so it goes first.
  std::stable_partition(entries.begin(), entries.end(), [](const Entry& e) { return e.key == "sim.preset"; });
  for (const auto& e : entries) {
    try {
      result.config.set(e.key, e.value);
    } catch (const Error& err) {
      result.diagnostics.push_back({e.line, e.key, err.what()});
    }
  }
  for (auto& d : check(result.config)) result.diagnostics.push_back(std::move(d));
  return result;
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::Io, "error while reading config file '" + path + "'");
  return parse_config(ss.str());
}

std::vector<Diagnostic> check(const ExperimentConfig& cfg) {
  std::vector<Diagnostic> out;
  auto guard = [&](const char* key, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      out.push_back({0, key, e.what()});
    }
  };

  bool oscillator_ok = true;
  guard("oscillator", [&] {
    try {
      cfg.oscillator();
    } catch (...) {
      oscillator_ok = false;
      throw;
    }
  });
  if (!(cfg.temperature >= 0.0)) out.push_back({0, "environment.temperature", "temperature must be >= 0"});
  if (cfg.light_power && !(*cfg.light_power >= 0.0))
    out.push_back({0, "feedback.light_power", "light power must be >= 0"});
  for (double g : cfg.gain_list)
    if (!(g >= 0.0 && g < 1.0)) {
      out.push_back({0, "feedback.gain_list", "gain sweep values must lie in [0, 1), got " + fmt(g)});
      break;
    }
  if (!(cfg.histogram_full_scale > 0.0))
    out.push_back({0, "sim.histogram_full_scale", "full scale must be > 0"});
  if (!(cfg.correlation_max_lag > 0.0))
    out.push_back({0, "sim.correlation_max_lag", "maximum lag must be > 0"});
  else if (cfg.correlation_max_lag > cfg.duration / 10.0)
    out.push_back({0, "sim.correlation_max_lag", "maximum lag must not exceed duration / 10"});
  if (!(std::abs(cfg.channel_mismatch) <= 0.01))
    out.push_back({0, "filter.channel_mismatch", "demodulation channels must match within 1%"});

  if (!oscillator_ok) return out;
  SimConfig sim = cfg.resolve(0);
  bool feedback_ok = true;
  guard("feedback", [&] {
    try {
      validate(sim.feedback);
    } catch (...) {
      feedback_ok = false;
      throw;
    }
  });
  // Feedback problems are reported once; keep them out of the remaining checks.
  if (!feedback_ok) {
    sim.feedback.gain = std::max(0.0, sim.feedback.gain);
    sim.feedback.saturation_force = 1.0;
  }
  guard("sim", [&] { validate(sim); });
  return out;
}

}  // namespace mirrorsim
