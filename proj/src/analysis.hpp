#pragma once

// Phase-space statistics over quadrature traces: occupancy histograms,
// dispersions, correlation functions with exponential fits, rotations, gain
// estimation and jump detection above the oscillation threshold.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trace.hpp"

namespace mirrorsim {

class PhaseSpaceHistogram {
 public:
  static constexpr std::size_t kBins = 256;

  explicit PhaseSpaceHistogram(double full_scale);

  // Adds every sample; samples outside [-full_scale, full_scale) on either
  // axis go to the overflow counter.
  void accumulate(const QuadratureTrace& trace);
  void merge(const PhaseSpaceHistogram& other);

  // row = X2 bin, column = X1 bin, both ascending.
  std::uint64_t cell(std::size_t row, std::size_t column) const { return cells_[row * kBins + column]; }
  std::span<const std::uint64_t> cells() const noexcept { return cells_; }
  double full_scale() const noexcept { return full_scale_; }
  double cell_width() const noexcept { return 2.0 * full_scale_ / static_cast<double>(kBins); }
  double bin_center(std::size_t index) const noexcept;
  std::uint64_t total_count() const noexcept { return total_; }
  std::uint64_t overflow_count() const noexcept { return overflow_; }

  // Counts summed over X1 (per X2 bin) / over X2 (per X1 bin).
  std::vector<std::uint64_t> marginal_x2() const;
  std::vector<std::uint64_t> marginal_x1() const;

  // Standard deviations of the binned distribution along each axis.
  struct Widths {
    double x1;
    double x2;
  };
  Widths widths() const;

 private:
  double full_scale_;
  std::vector<std::uint64_t> cells_;
  std::uint64_t total_ = 0;
  std::uint64_t overflow_ = 0;
};

PhaseSpaceHistogram histogram(const QuadratureTrace& trace, double full_scale);

struct Dispersions {
  double dx1;  // m
  double dx2;  // m
};

// Mean-subtracted population standard deviations; needs >= 100 samples.
Dispersions dispersions(const QuadratureTrace& trace);

struct ExponentialFit {
  double gamma;     // rad/s, from C(tau) = V exp(-gamma tau / 2)
  double variance;  // m^2, fitted C(0)
  double residual;  // rms of the log-domain residuals
  std::size_t points;
};

struct CorrelationEstimate {
  int i = 1;
  int j = 1;
  double lag_step = 0.0;       // s
  std::vector<double> values;  // m^2, values[k] at lag k * lag_step
  std::optional<ExponentialFit> fit;  // only for i == j

  double lag(std::size_t k) const noexcept { return lag_step * static_cast<double>(k); }
};

// Biased (1/N) estimator of <X_i(t) X_j(t + tau)> on mean-subtracted data,
// tau in [0, tau_max]. For i == j also fits the exponential on log scale over
// the leading lags where C > 0.1 C(0).
CorrelationEstimate correlation(const QuadratureTrace& trace, int i, int j, double tau_max);

// Same estimator without the fit and without the duration / 10 limit.
CorrelationEstimate correlation_values(const QuadratureTrace& trace, int i, int j, double tau_max);

// Log-linear least-squares fit of V exp(-gamma tau / 2) over the leading
// values above 0.1 values[0]. Throws Fit when fewer than two usable points.
ExponentialFit fit_exponential_decay(std::span<const double> values, double lag_step);

// (X1', X2') = (X1 cos + X2 sin, -X1 sin + X2 cos).
QuadratureTrace rotate_quadratures(const QuadratureTrace& trace, double theta);

struct GainEstimate {
  double mean;
  double spread;  // (max - min) / |mean|
  bool consistent;
  std::size_t count;
};

// Average of independent gain estimates; spread above 20 % is flagged.
GainEstimate estimate_gain(std::span<const double> estimates);

// Builds the four estimates {Gamma1/Gamma - 1, 1 - Gamma2/Gamma,
// V_free/V1 - 1, 1 - V_free/V2} from whichever measurements are present.
struct GainObservations {
  double gamma_free;  // rad/s
  double var_free;    // m^2
  std::optional<double> gamma1, gamma2, var1, var2;
};
GainEstimate estimate_gain(const GainObservations& obs);

struct JumpStats {
  std::vector<double> dwell_times;  // s
  std::size_t jump_count = 0;
  double positive_lobe_mean = 0.0;  // m, mean X2 while in the +<X2> lobe
  double negative_lobe_mean = 0.0;  // m
  std::vector<double> segment_means;  // m, mean X2 per dwell segment
  double positive_time = 0.0;  // s spent assigned to each lobe
  double negative_time = 0.0;
};

// Hysteresis detector along X2: a lobe is entered when |X2| > threshold and a
// jump is registered only when X2 reaches beyond the opposite threshold.
JumpStats detect_jumps(const QuadratureTrace& trace, double threshold);

}  // namespace mirrorsim
