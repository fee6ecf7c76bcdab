#include "io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <memory>

#include "error.hpp"

namespace mirrorsim {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_for_write(const std::string& path) {
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::Io, "cannot open '" + path + "' for writing: " + std::strerror(errno));
  return f;
}

void finish(File f, const std::string& path) {
  const bool bad = std::ferror(f.get()) != 0;
  if (std::fclose(f.release()) != 0 || bad) fail(ErrorCode::Io, "error while writing '" + path + "'");
}

}  // namespace

void write_trace_csv(const std::string& path, const QuadratureTrace& trace) {
  auto f = open_for_write(path);
  std::fputs("time_s,x1_m,x2_m\n", f.get());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& p = trace.samples[k];
    std::fprintf(f.get(), "%.17g,%.17g,%.17g\n", trace.sample_period * static_cast<double>(k), p.x1, p.x2);
  }
  finish(std::move(f), path);
}

void write_histogram(const std::string& path, const PhaseSpaceHistogram& h) {
  auto f = open_for_write(path);
  std::fprintf(f.get(), "# full_scale_m = %.17g\n", h.full_scale());
  std::fprintf(f.get(), "# total_count = %llu\n", static_cast<unsigned long long>(h.total_count()));
  std::fprintf(f.get(), "# overflow_count = %llu\n", static_cast<unsigned long long>(h.overflow_count()));
  std::fputs("# rows: X2 bin ascending, columns: X1 bin ascending\n", f.get());
  constexpr auto n = PhaseSpaceHistogram::kBins;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c)
      std::fprintf(f.get(), c + 1 < n ? "%llu," : "%llu\n", static_cast<unsigned long long>(h.cell(r, c)));
  }
  finish(std::move(f), path);
}

void write_correlations(const std::string& path, const CorrelationEstimate& c11, const CorrelationEstimate& c22,
                        const CorrelationEstimate& c12, const CorrelationEstimate& c21) {
  const std::size_t n = c11.values.size();
  if (c22.values.size() != n || c12.values.size() != n || c21.values.size() != n)
    fail(ErrorCode::InvalidArgument, "correlation estimates have different lag grids");
  auto f = open_for_write(path);
  std::fputs("lag_s,c11_m2,c22_m2,c12_m2,c21_m2\n", f.get());
  for (std::size_t k = 0; k < n; ++k)
    std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g\n", c11.lag(k), c11.values[k], c22.values[k],
                 c12.values[k], c21.values[k]);
  finish(std::move(f), path);
}

void write_text(const std::string& path, const std::string& text) {
  auto f = open_for_write(path);
  std::fwrite(text.data(), 1, text.size(), f.get());
  finish(std::move(f), path);
}

}  // namespace mirrorsim
