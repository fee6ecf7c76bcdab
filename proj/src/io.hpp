#pragma once

// Flat-file writers for traces, histograms and correlation functions.

#include <string>

#include "analysis.hpp"
#include "trace.hpp"

namespace mirrorsim {

// Header `time_s,x1_m,x2_m`, one row per sample, 17 significant digits.
void write_trace_csv(const std::string& path, const QuadratureTrace& trace);

// `#` header lines with full_scale and total_count, then 256 rows (X2 bin
// ascending) of 256 comma-separated counts (X1 bin ascending).
void write_histogram(const std::string& path, const PhaseSpaceHistogram& h);

// Columns lag_s,c11_m2,c22_m2,c12_m2,c21_m2; the four estimates must share a lag grid.
void write_correlations(const std::string& path, const CorrelationEstimate& c11, const CorrelationEstimate& c22,
                        const CorrelationEstimate& c12, const CorrelationEstimate& c21);

void write_text(const std::string& path, const std::string& text);

}  // namespace mirrorsim
