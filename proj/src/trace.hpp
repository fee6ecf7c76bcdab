#pragma once

#include <cstdint>
#include <vector>

namespace mirrorsim {

enum class TraceOrigin { DirectRotatingFrame, DemodulatedReadout };

struct QuadraturePoint {
  double x1 = 0.0;  // m
  double x2 = 0.0;  // m
};

// Uniformly sampled slow quadratures; sample k sits at time k * sample_period.
struct QuadratureTrace {
  double sample_period = 0.0;  // s
  std::vector<QuadraturePoint> samples;
  TraceOrigin origin = TraceOrigin::DirectRotatingFrame;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration() const noexcept { return sample_period * static_cast<double>(samples.size()); }
};

}  // namespace mirrorsim
