#pragma once

#include "esdrnn/timeseries.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esdrnn {

struct HarmonicShare {
	std::size_t index = 0;
	double period_hours = 0.0;
	double percent = 0.0;
};

/// Variability profile of one series.
struct SeriesDiagnostics {
	std::string series_id;
	std::optional<double> v_daily;  // mean over days of the within-day variation coefficient
	std::optional<double> v_weekly; // mean over weeks, computed on daily means
	std::optional<double> v_yearly; // mean over 52-week years, computed on weekly means
	std::optional<double> h_daily, h_weekly, h_half_yearly, h_yearly;
	std::vector<HarmonicShare> top_harmonics;
	std::optional<double> mean_pattern_distance; // same weekday of adjacent weeks
};

SeriesDiagnostics diagnose(const HourlySeries &series, std::size_t top_k = 3);

/// Rows `series_id,metric,value`.
void write_diagnostics_csv(std::ostream &out, std::span<const SeriesDiagnostics> diags);

} // namespace esdrnn
