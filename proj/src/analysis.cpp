#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"

namespace mirrorsim {

namespace {

double channel(const QuadraturePoint& p, int index) { return index == 1 ? p.x1 : p.x2; }

void check_channel(int index) {
  if (index != 1 && index != 2) fail(ErrorCode::InvalidArgument, "quadrature index must be 1 or 2");
}

std::vector<double> centered(const QuadratureTrace& trace, int index) {
  std::vector<double> v;
  v.reserve(trace.size());
  double sum = 0.0;
  for (const auto& p : trace.samples) {
    v.push_back(channel(p, index));
    sum += v.back();
  }
  const double mean = sum / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
  return v;
}

double mean_square(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

// --- histogram ---------------------------------------------------------------

PhaseSpaceHistogram::PhaseSpaceHistogram(double full_scale)
    : full_scale_(full_scale), cells_(kBins * kBins, 0) {
  if (!(full_scale > 0.0) || !std::isfinite(full_scale))
    fail(ErrorCode::InvalidArgument, "histogram full scale must be > 0");
}

double PhaseSpaceHistogram::bin_center(std::size_t index) const noexcept {
  return -full_scale_ + (static_cast<double>(index) + 0.5) * cell_width();
}

void PhaseSpaceHistogram::accumulate(const QuadratureTrace& trace) {
  const double scale = static_cast<double>(kBins) / (2.0 * full_scale_);
  auto bin = [&](double x) -> std::ptrdiff_t {
    const double u = (x + full_scale_) * scale;
    if (!(u >= 0.0) || !(u < static_cast<double>(kBins))) return -1;
    return static_cast<std::ptrdiff_t>(u);
  };
  for (const auto& p : trace.samples) {
    ++total_;
    const auto c = bin(p.x1);
    const auto r = bin(p.x2);
    if (c < 0 || r < 0) {
      ++overflow_;
      continue;
    }
    ++cells_[static_cast<std::size_t>(r) * kBins + static_cast<std::size_t>(c)];
  }
}

void PhaseSpaceHistogram::merge(const PhaseSpaceHistogram& other) {
  if (other.full_scale_ != full_scale_)
    fail(ErrorCode::InvalidArgument, "cannot merge histograms with different full scales");
  for (std::size_t k = 0; k < cells_.size(); ++k) cells_[k] += other.cells_[k];
  total_ += other.total_;
  overflow_ += other.overflow_;
}

std::vector<std::uint64_t> PhaseSpaceHistogram::marginal_x2() const {
  std::vector<std::uint64_t> m(kBins, 0);
  for (std::size_t r = 0; r < kBins; ++r)
    for (std::size_t c = 0; c < kBins; ++c) m[r] += cells_[r * kBins + c];
  return m;
}

std::vector<std::uint64_t> PhaseSpaceHistogram::marginal_x1() const {
  std::vector<std::uint64_t> m(kBins, 0);
  for (std::size_t r = 0; r < kBins; ++r)
    for (std::size_t c = 0; c < kBins; ++c) m[c] += cells_[r * kBins + c];
  return m;
}

PhaseSpaceHistogram::Widths PhaseSpaceHistogram::widths() const {
  auto width = [&](const std::vector<std::uint64_t>& m) {
    double n = 0.0, s = 0.0, q = 0.0;
    for (std::size_t k = 0; k < kBins; ++k) {
      const double w = static_cast<double>(m[k]);
      const double x = bin_center(k);
      n += w;
      s += w * x;
      q += w * x * x;
    }
    if (n == 0.0) return 0.0;
    const double mean = s / n;
    return std::sqrt(std::max(0.0, q / n - mean * mean));
  };
  return {width(marginal_x1()), width(marginal_x2())};
}

PhaseSpaceHistogram histogram(const QuadratureTrace& trace, double full_scale) {
  if (trace.empty()) fail(ErrorCode::InsufficientData, "cannot histogram an empty trace");
  PhaseSpaceHistogram h(full_scale);
  h.accumulate(trace);
  return h;
}

// --- dispersions / correlation ---------------------------------------------

Dispersions dispersions(const QuadratureTrace& trace) {
  if (trace.size() < 100)
    fail(ErrorCode::InsufficientData,
         "dispersions need at least 100 samples, got " + std::to_string(trace.size()));
  const auto a = centered(trace, 1);
  const auto b = centered(trace, 2);
  return {std::sqrt(mean_square(a)), std::sqrt(mean_square(b))};
}

ExponentialFit fit_exponential_decay(std::span<const double> values, double lag_step) {
  if (values.empty() || !(values[0] > 0.0))
    fail(ErrorCode::Fit, "correlation is not positive at zero lag; nothing to fit");
  const double floor = 0.1 * values[0];
  std::size_t n = 0;
  while (n < values.size() && values[n] > floor) ++n;
  if (n < 2) fail(ErrorCode::Fit, "fewer than two correlation values above 0.1 C(0); trace is noise dominated");

  // Weighted on log scale: var(log C) ~ var(C) / C^2, so weights C^2 keep the
  // noisy tail from dominating the slope.
  double sw = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = values[k] * values[k];
    const double t = lag_step * static_cast<double>(k);
    const double y = std::log(values[k]);
    sw += w;
    st += w * t;
    sy += w * y;
    stt += w * t * t;
    sty += w * t * y;
  }
  const double slope = (sw * sty - st * sy) / (sw * stt - st * st);
  const double intercept = (sy - slope * st) / sw;
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = lag_step * static_cast<double>(k);
    const double r = std::log(values[k]) - (intercept + slope * t);
    ss += values[k] * values[k] * r * r;
  }
  return {-2.0 * slope, std::exp(intercept), std::sqrt(ss / sw), n};
}

CorrelationEstimate correlation_values(const QuadratureTrace& trace, int i, int j, double tau_max) {
  check_channel(i);
  check_channel(j);
  if (trace.empty()) fail(ErrorCode::InsufficientData, "correlation of an empty trace");
  if (!(tau_max >= 0.0)) fail(ErrorCode::InvalidArgument, "tau_max must be >= 0");

  const auto a = centered(trace, i);
  const auto b = i == j ? a : centered(trace, j);
  const std::size_t n = a.size();
  const auto lags = std::min(n, static_cast<std::size_t>(std::floor(tau_max / trace.sample_period + 1e-9)) + 1);

  CorrelationEstimate est;
  est.i = i;
  est.j = j;
  est.lag_step = trace.sample_period;
  est.values.resize(lags);
  for (std::size_t k = 0; k < lags; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) acc += a[t] * b[t + k];
    est.values[k] = acc / static_cast<double>(n);
  }
  return est;
}

CorrelationEstimate correlation(const QuadratureTrace& trace, int i, int j, double tau_max) {
  if (trace.size() < 2) fail(ErrorCode::InsufficientData, "correlation needs at least two samples");
  if (!(tau_max >= 0.0) || tau_max > trace.duration() / 10.0 * (1.0 + 1e-12))
    fail(ErrorCode::InvalidArgument, "tau_max must lie in [0, duration/10]");
  auto est = correlation_values(trace, i, j, tau_max);
  if (i == j) est.fit = fit_exponential_decay(est.values, est.lag_step);
  return est;
}

QuadratureTrace rotate_quadratures(const QuadratureTrace& trace, double theta) {
  QuadratureTrace out = trace;
  const double c = std::cos(theta), s = std::sin(theta);
  for (auto& p : out.samples) {
    const double x1 = p.x1, x2 = p.x2;
    p.x1 = x1 * c + x2 * s;
    p.x2 = -x1 * s + x2 * c;
  }
  return out;
}

// --- gain -----------------------------------------------------------------

GainEstimate estimate_gain(std::span<const double> estimates) {
  if (estimates.size() < 2) fail(ErrorCode::InsufficientData, "gain estimation needs at least two estimates");
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(estimates.size());
  const auto [lo, hi] = std::minmax_element(estimates.begin(), estimates.end());
  const double range = *hi - *lo;
  const double spread = mean != 0.0 ? range / std::abs(mean) : (range == 0.0 ? 0.0 : INFINITY);
  return {mean, spread, spread <= 0.2, estimates.size()};
}

GainEstimate estimate_gain(const GainObservations& obs) {
  std::vector<double> e;
  if (obs.gamma1) e.push_back(*obs.gamma1 / obs.gamma_free - 1.0);
  if (obs.gamma2) e.push_back(1.0 - *obs.gamma2 / obs.gamma_free);
  if (obs.var1) e.push_back(obs.var_free / *obs.var1 - 1.0);
  if (obs.var2) e.push_back(1.0 - obs.var_free / *obs.var2);
  return estimate_gain(e);
}

// --- jumps ----------------------------------------------------------------

JumpStats detect_jumps(const QuadratureTrace& trace, double threshold) {
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "jump threshold must be > 0");
  JumpStats stats;
  const std::size_t n = trace.size();
  int lobe = 0;
  std::size_t seg_start = 0;
  double seg_sum = 0.0;
  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t pos_n = 0, neg_n = 0;

  auto close_segment = [&](std::size_t end) {
    const std::size_t len = end - seg_start;
    stats.dwell_times.push_back(static_cast<double>(len) * trace.sample_period);
    stats.segment_means.push_back(len ? seg_sum / static_cast<double>(len) : 0.0);
    if (lobe > 0) {
      pos_sum += seg_sum;
      pos_n += len;
    } else {
      neg_sum += seg_sum;
      neg_n += len;
    }
  };

  for (std::size_t k = 0; k < n; ++k) {
    const double x2 = trace.samples[k].x2;
    const int side = x2 > threshold ? 1 : (x2 < -threshold ? -1 : 0);
    if (lobe == 0) {
      if (side == 0) continue;
      lobe = side;
      seg_start = k;
      seg_sum = 0.0;
    } else if (side == -lobe) {
      close_segment(k);
      ++stats.jump_count;
      lobe = side;
      seg_start = k;
      seg_sum = 0.0;
    }
    seg_sum += x2;
  }
  if (lobe != 0) close_segment(n);

  stats.positive_lobe_mean = pos_n ? pos_sum / static_cast<double>(pos_n) : 0.0;
  stats.negative_lobe_mean = neg_n ? neg_sum / static_cast<double>(neg_n) : 0.0;
  stats.positive_time = static_cast<double>(pos_n) * trace.sample_period;
  stats.negative_time = static_cast<double>(neg_n) * trace.sample_period;
  return stats;
}

}  // namespace mirrorsim
