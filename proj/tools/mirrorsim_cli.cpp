// mirrorsim: run experiment scenarios and validate configuration files.
//
//   mirrorsim run --scenario free --config configs/paper.conf --seed 1 --out out/free
//   mirrorsim validate --config configs/paper.conf
//
// Exit status: 0 all checks passed, 1 a check failed or the config has
// diagnostics, 2 usage / runtime error.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mirrorsim/mirrorsim.h"

namespace {

struct ConfigDeleter {
  void operator()(msim_config* c) const { msim_config_free(c); }
};
struct DiagDeleter {
  void operator()(msim_diagnostics* d) const { msim_diagnostics_free(d); }
};
struct ReportDeleter {
  void operator()(msim_report* r) const { msim_report_free(r); }
};
using ConfigPtr = std::unique_ptr<msim_config, ConfigDeleter>;
using DiagPtr = std::unique_ptr<msim_diagnostics, DiagDeleter>;
using ReportPtr = std::unique_ptr<msim_report, ReportDeleter>;

int report_error(msim_status s, const char* context) {
  std::fprintf(stderr, "mirrorsim: %s: %s: %s\n", context, msim_status_string(s), msim_last_error());
  return 2;
}

size_t print_diagnostics(const msim_diagnostics* d, const std::string& path) {
  const size_t n = msim_diagnostics_count(d);
  for (size_t k = 0; k < n; ++k) std::fprintf(stderr, "%s: %s\n", path.c_str(), msim_diagnostics_message(d, k));
  return n;
}

// Loads path (or the paper preset when empty) and prints its diagnostics,
// which include the invariant checks; *diag_count receives their number.
ConfigPtr load(const std::string& path, size_t* diag_count, int* status) {
  msim_config* raw = nullptr;
  msim_diagnostics* diags = nullptr;
  msim_status s = path.empty() ? msim_config_new("paper", &raw) : msim_config_load(path.c_str(), &raw, &diags);
  ConfigPtr cfg(raw);
  DiagPtr parse_diags(diags);
  if (s != MSIM_OK) {
    *status = report_error(s, path.c_str());
    return nullptr;
  }
  if (path.empty()) {
    msim_diagnostics* checks = nullptr;
    s = msim_config_validate(cfg.get(), &checks);
    parse_diags.reset(checks);
    if (s != MSIM_OK) {
      *status = report_error(s, "validate");
      return nullptr;
    }
  }
  *diag_count = print_diagnostics(parse_diags.get(), path.empty() ? "<defaults>" : path);
  *status = 0;
  return cfg;
}

int cmd_validate(const std::string& path) {
  size_t n = 0;
  int status = 0;
  auto cfg = load(path, &n, &status);
  if (!cfg) return status;

  size_t needed = 0;
  msim_config_dump(cfg.get(), nullptr, 0, &needed);
  std::string buf(needed, '\0');
  if (const auto s = msim_config_dump(cfg.get(), buf.data(), buf.size(), &needed); s != MSIM_OK)
    return report_error(s, "dump");
  buf.resize(needed ? needed - 1 : 0);
  std::printf("%s", buf.c_str());
  std::printf("# %zu diagnostic(s)\n", n);
  return n == 0 ? 0 : 1;
}

int cmd_run(const std::string& scenario, const std::string& path, uint64_t seed, const std::string& out,
            std::optional<double> duration, std::optional<double> gain, unsigned threads) {
  size_t n = 0;
  int status = 0;
  auto cfg = load(path, &n, &status);
  if (!cfg) return status;
  if (n > 0) {
    std::fprintf(stderr, "mirrorsim: configuration has %zu diagnostic(s); not running\n", n);
    return 2;
  }

  msim_run_options opts{};
  opts.has_duration = duration.has_value();
  opts.duration = duration.value_or(0.0);
  opts.has_gain = gain.has_value();
  opts.gain = gain.value_or(0.0);
  opts.output_dir = out.c_str();
  opts.threads = threads;

  msim_report* raw = nullptr;
  const auto s = msim_run_scenario(cfg.get(), scenario.c_str(), seed, &opts, &raw);
  ReportPtr report(raw);
  if (s != MSIM_OK) return report_error(s, scenario.c_str());
  std::printf("%s", msim_report_text(report.get()));
  return msim_report_passed(report.get()) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-Q mirror mode simulator: thermal noise, feedback cooling and parametric squeezing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msim_version());

  std::string scenario, config_path, out_dir;
  uint64_t seed = 1;
  std::optional<double> duration, gain;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run a scenario and write trace, histogram, correlation and report files");
  run->add_option("--scenario", scenario, "free | cold_damp | param_below | param_above | gain_sweep | noise_floor")
      ->required();
  run->add_option("--config", config_path, "key/value config file (default: paper parameters)")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "master random seed");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--duration", duration, "simulated duration in seconds");
  run->add_option("--gain", gain, "feedback gain");
  run->add_option("--threads", threads, "worker threads for sweeps and ensembles (0: all cores)");

  auto* validate = app.add_subcommand("validate", "check a config file and print the resolved parameters");
  validate->add_option("--config", config_path, "key/value config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run) return cmd_run(scenario, config_path, seed, out_dir, duration, gain, threads);
  return cmd_validate(config_path);
}
