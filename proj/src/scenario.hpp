#pragma once

// Scenario runner behind the command-line tool: builds the simulation for a
// named experiment, analyses the traces against the closed-form model and
// writes trace / histogram / correlation / report files.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "config.hpp"

namespace mirrorsim {

enum class Scenario { Free, ColdDamp, ParamBelow, ParamAbove, GainSweep, NoiseFloor };

std::optional<Scenario> parse_scenario(std::string_view name);
std::string to_string(Scenario s);

enum class CheckStatus { Pass, Fail, Info };

// One `metric = measured | theory | rel_error | tolerance | STATUS` line.
struct Check {
  std::string metric;
  double measured = 0.0;
  double theory = 0.0;
  double rel_error = 0.0;  // NaN when not meaningful
  std::string tolerance;
  CheckStatus status = CheckStatus::Info;

  static Check relative(std::string metric, double measured, double theory, double tol);
  // lo < measured < hi (either side may be infinite).
  static Check within(std::string metric, double measured, double theory, double lo, double hi);
  static Check info(std::string metric, double measured, double theory);

  std::string line() const;
};

struct RunOptions {
  std::optional<double> duration;  // s
  std::optional<double> gain;
  std::string output_dir;          // empty: no files
  unsigned threads = 0;            // 0: hardware concurrency
};

struct RunReport {
  Scenario scenario = Scenario::Free;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::vector<std::string> files;
  double wall_seconds = 0.0;

  bool passed() const;
  std::size_t failures() const;
  std::string text() const;
};

// Throws Error for configuration problems, divergence and I/O failures.
RunReport run_scenario(Scenario scenario, const ExperimentConfig& cfg, std::uint64_t seed,
                       const RunOptions& options);

}  // namespace mirrorsim
