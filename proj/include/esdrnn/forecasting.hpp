#pragma once

// Next-day inference: warm-up replay over the recent history, then the three
// output heads converted back to load units.

#include "esdrnn/timeseries.hpp"
#include "esdrnn/training.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace esdrnn {

struct ForecastBundle {
	std::string series_id;
	Timestamp day; // midnight of the forecasted day
	Eigen::VectorXd point;
	Eigen::VectorXd lower;
	Eigen::VectorXd upper;
};

/// Forecast for the day starting at `target_day`, from a fresh replay of the
/// `warmup_weeks` weeks before it. Data from target_day on is ignored.
ForecastBundle forecast_day(const Model &model, const HourlySeries &history, Timestamp target_day, int warmup_weeks);

/// Forecasts for every day in [first_day, last_day]. After the initial replay
/// the states are carried forward with the actual load of each forecasted
/// day, which must be present for every day but the last.
std::vector<ForecastBundle> rolling_forecast(const Model &model, const HourlySeries &history, Timestamp first_day,
                                             Timestamp last_day, int warmup_weeks);

/// Elementwise mean of the members' bounds and point forecasts.
ForecastBundle average_bundles(std::span<const ForecastBundle> members);

ForecastBundle forecast_ensemble(std::span<const Model> models, const HourlySeries &history, Timestamp target_day,
                                 int warmup_weeks);

std::vector<ForecastBundle> rolling_forecast_ensemble(std::span<const Model> models, const HourlySeries &history,
                                                      Timestamp first_day, Timestamp last_day, int warmup_weeks);

/// `series_id,timestamp,point,lower,upper`, one row per hour.
void write_forecast_csv(std::ostream &out, std::span<const ForecastBundle> bundles);
void write_forecast_csv(const std::filesystem::path &path, std::span<const ForecastBundle> bundles);
std::vector<ForecastBundle> read_forecast_csv(std::istream &in, const std::string &source = "<stream>");
std::vector<ForecastBundle> load_forecast_csv(const std::filesystem::path &path);

} // namespace esdrnn
