#pragma once

// Accuracy metrics, interval coverage and the seasonal naive benchmark.

#include "esdrnn/forecasting.hpp"
#include "esdrnn/timeseries.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esdrnn {

/// Linear-interpolation quantile over the sorted sample (inclusive endpoints).
double quantile(std::vector<double> sample, double q);

struct ErrorSummary {
	std::size_t count = 0;
	double mape = 0.0;
	double mdape = 0.0;
	double iqrape = 0.0;
	double rmse = 0.0;
	double mpe = 0.0;
	double stdpe = 0.0;
	bool has_intervals = false;
	double pi_inside = 0.0; // percent; bound hits count as inside
	double pi_below = 0.0;
	double pi_above = 0.0;
};

/// APE = 100|z - z_hat| / z, PE = 100 (z - z_hat) / z. Pass empty bounds to
/// skip interval accounting.
ErrorSummary summarize_errors(std::span<const double> actuals, std::span<const double> forecasts,
                              std::span<const double> lower = {}, std::span<const double> upper = {});

/// One evaluated hour.
struct EvaluationRecord {
	std::string series_id;
	Timestamp time;
	double actual = 0.0;
	double point = 0.0;
	std::optional<double> lower;
	std::optional<double> upper;
};

struct MetricsReport {
	ErrorSummary overall;
	std::map<int, ErrorSummary> by_hour;    // 0-23
	std::map<int, ErrorSummary> by_weekday; // Monday = 0
	std::map<int, ErrorSummary> by_month;   // 1-12
};

MetricsReport compute_metrics(std::span<const EvaluationRecord> records);

/// Profile of the day one week earlier.
Eigen::VectorXd naive_forecast(const HourlySeries &series, Timestamp target_day);

/// Naive forecasts for each day in [first_day, last_day], without intervals.
std::vector<ForecastBundle> naive_forecasts(const HourlySeries &series, Timestamp first_day, Timestamp last_day);

struct EvaluationResult {
	std::map<std::string, MetricsReport> per_series;
	/// Unweighted mean over series of each aggregate metric.
	ErrorSummary cross_series_mean;
};

/// Pairs forecasts with actual load hour by hour. Forecast hours without an
/// actual are collected in `unmatched` (first ten reported by the thrower).
std::vector<EvaluationRecord> match_forecasts(std::span<const ForecastBundle> forecasts,
                                              std::span<const HourlySeries> actuals, bool with_intervals,
                                              std::vector<std::string> *unmatched = nullptr);

EvaluationResult evaluate(std::span<const EvaluationRecord> records);

void write_report_json(const std::filesystem::path &path, const EvaluationResult &result);
/// Rows: series_id,breakdown,key,count,mape,mdape,iqrape,rmse,mpe,stdpe,pi_inside,pi_below,pi_above
void write_breakdown_csv(const std::filesystem::path &path, const EvaluationResult &result);

} // namespace esdrnn
