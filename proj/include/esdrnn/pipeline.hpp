#pragma once

// Moving-window preprocessing (deseasonalise, normalise, squash) and the
// inverse transform applied to network outputs.

#include "esdrnn/es.hpp"
#include "esdrnn/network.hpp"
#include "esdrnn/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace esdrnn {

struct TrainingSample {
	std::size_t input_start = 0;        // first hour of the 168-hour input window
	Eigen::VectorXd x_in;               // 168
	Eigen::VectorXd s_hat;              // 24, seasonal factors of the output hours minus one
	double level_log = 0.0;             // log10(z_bar)
	CalendarFeatures calendar;          // of the forecasted day
	Timestamp forecast_start;           // first output hour
	double z_bar = 0.0;                 // input-window mean
	Eigen::VectorXd s_hat_out_raw;      // 24 seasonal factors for reconstruction
	bool has_target = false;            // output window lies inside the series
	Eigen::VectorXd x_out;              // 24, only with a target
	Eigen::VectorXd z_out_normalized;   // 24, z / z_bar, only with a target
	bool warmup_flag = false;

	NetworkInput network_input() const;
};

/// Builds the window pair whose input starts at `input_start`. The ES state
/// must have processed every hour up to input_start + 167. With
/// `deseasonalize` off the seasonal factors are taken as 1.
TrainingSample make_sample(const HourlySeries &series, const es::EsState &state, std::size_t input_start,
                           bool deseasonalize = true);

/// exp(x_hat) * z_bar * s_hat per hour.
Eigen::VectorXd postprocess(const Eigen::VectorXd &x_hat, double z_bar, const Eigen::VectorXd &s_hat_out_raw);

/// Runs the 24 hourly recursions starting at `first_hour` with the state's
/// current coefficients, then sets the coefficients from the corrections.
es::EsState advance_day(const HourlySeries &series, es::EsState state, std::size_t first_hour, double delta_alpha,
                        double delta_beta);

/// Derivatives of the 24 seasonal factors written during one day with respect
/// to that day's (alpha, beta); the state entering the day is held constant.
using DayTangents = Eigen::Matrix<double, kHorizon, 2>;

/// Same recursion as advance_day without the coefficient update, also
/// returning the tangents of the written factors.
DayTangents advance_day_tracked(const HourlySeries &series, es::EsState &state, std::size_t first_hour);

} // namespace esdrnn
