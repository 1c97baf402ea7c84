#include "esdrnn/pipeline.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>

namespace esdrnn {

NetworkInput TrainingSample::network_input() const {
	NetworkInput in;
	in.x_in = x_in;
	in.s_hat_centered = s_hat;
	in.level_log = level_log;
	in.calendar = calendar.one_hot();
	return in;
}

TrainingSample make_sample(const HourlySeries &series, const es::EsState &state, std::size_t input_start,
                           bool deseasonalize) {
	if (input_start + kInputWindow > series.size()) {
		throw ValidationError("make_sample: input window at hour " + std::to_string(input_start) +
		                      " exceeds series '" + series.id + "' of length " + std::to_string(series.size()));
	}
	TrainingSample s;
	s.input_start = input_start;
	const Eigen::Map<const Eigen::VectorXd> z_in(series.values.data() + input_start, kInputWindow);
	s.z_bar = z_in.mean();
	if (!(s.z_bar > 0.0)) {
		throw ValidationError("make_sample: non-positive window mean");
	}

	const Eigen::VectorXd s_in =
	    deseasonalize ? es::seasonal_window(state, 0, kInputWindow) : Eigen::VectorXd::Ones(kInputWindow);
	s.s_hat_out_raw = deseasonalize ? es::seasonal_window(state, 0, kHorizon) : Eigen::VectorXd::Ones(kHorizon);

	s.x_in = (z_in.array() / (s.z_bar * s_in.array())).log().matrix();
	s.s_hat = s.s_hat_out_raw.array() - 1.0;
	s.level_log = std::log10(s.z_bar);
	s.forecast_start = series.at(input_start + kInputWindow);
	s.calendar = calendar_for(s.forecast_start);

	if (input_start + kInputWindow + kHorizon <= series.size()) {
		s.has_target = true;
		const Eigen::Map<const Eigen::VectorXd> z_out(series.values.data() + input_start + kInputWindow, kHorizon);
		s.z_out_normalized = z_out / s.z_bar;
		s.x_out = (s.z_out_normalized.array() / s.s_hat_out_raw.array()).log().matrix();
	}
	if (!s.x_in.allFinite() || (s.has_target && !s.x_out.allFinite())) {
		throw NumericError("make_sample: non-finite pattern for series '" + series.id + "'");
	}
	return s;
}

Eigen::VectorXd postprocess(const Eigen::VectorXd &x_hat, double z_bar, const Eigen::VectorXd &s_hat_out_raw) {
	if (x_hat.size() != s_hat_out_raw.size()) {
		throw ShapeError("postprocess: length mismatch");
	}
	if (!x_hat.allFinite() || !std::isfinite(z_bar) || !s_hat_out_raw.allFinite()) {
		throw NumericError("postprocess: non-finite input");
	}
	if (!(z_bar > 0.0) || (s_hat_out_raw.array() <= 0.0).any()) {
		throw DomainError("postprocess: level and seasonal factors must be positive");
	}
	return (x_hat.array().exp() * z_bar * s_hat_out_raw.array()).matrix();
}

namespace {

void check_day(const HourlySeries &series, std::size_t first_hour) {
	if (first_hour + kHorizon > series.size()) {
		throw ValidationError("advance_day: hours [" + std::to_string(first_hour) + ", " +
		                      std::to_string(first_hour + kHorizon) + ") exceed series '" + series.id + "'");
	}
}

} // namespace

es::EsState advance_day(const HourlySeries &series, es::EsState state, std::size_t first_hour, double delta_alpha,
                        double delta_beta) {
	check_day(series, first_hour);
	for (std::size_t k = 0; k < kHorizon; ++k) {
		es::advance_hour(state, series.values[first_hour + k]);
	}
	return es::update_coefficients(std::move(state), delta_alpha, delta_beta);
}

DayTangents advance_day_tracked(const HourlySeries &series, es::EsState &state, std::size_t first_hour) {
	check_day(series, first_hour);
	using Dual = Eigen::AutoDiffScalar<Eigen::Vector2d>;
	const Eigen::Vector2d zero = Eigen::Vector2d::Zero();

	es::BasicEsState<Dual> d;
	d.level = Dual(state.level, zero);
	for (std::size_t k = 0; k < es::kSeasonLength; ++k) {
		d.seasonal[k] = Dual(state.seasonal[k], zero);
	}
	d.head = state.head;
	d.alpha = Dual(state.alpha, Eigen::Vector2d(1.0, 0.0));
	d.beta = Dual(state.beta, Eigen::Vector2d(0.0, 1.0));
	d.i_alpha = state.i_alpha;
	d.i_beta = state.i_beta;

	DayTangents tangents;
	const std::size_t first_slot = d.head;
	for (std::size_t k = 0; k < kHorizon; ++k) {
		es::advance_hour(d, series.values[first_hour + k]);
	}
	for (std::size_t k = 0; k < kHorizon; ++k) {
		const Dual &s = d.seasonal[(first_slot + k) % es::kSeasonLength];
		tangents.row(static_cast<Eigen::Index>(k)) = s.derivatives().transpose();
	}

	state.level = d.level.value();
	for (std::size_t k = 0; k < es::kSeasonLength; ++k) {
		state.seasonal[k] = d.seasonal[k].value();
	}
	state.head = d.head;
	return tangents;
}

} // namespace esdrnn
