#include "esdrnn/es.hpp"

#include <numeric>

namespace esdrnn::es {

EsState init_state(std::span<const double> prefix, double i_alpha, double i_beta) {
	if (prefix.size() < kSeasonLength) {
		throw ValidationError("init_state: need at least 168 values, got " + std::to_string(prefix.size()));
	}
	for (std::size_t k = 0; k < kSeasonLength; ++k) {
		if (!(prefix[k] > 0.0)) {
			throw ValidationError("init_state: non-positive value at offset " + std::to_string(k));
		}
	}
	EsState s;
	s.level = std::accumulate(prefix.begin(), prefix.begin() + kSeasonLength, 0.0) / double(kSeasonLength);
	for (std::size_t k = 0; k < kSeasonLength; ++k) {
		s.seasonal[k] = prefix[k] / s.level;
	}
	s.head = 0;
	s.i_alpha = i_alpha;
	s.i_beta = i_beta;
	s.alpha = sigmoid(i_alpha);
	s.beta = sigmoid(i_beta);
	return s;
}

EsState update_coefficients(EsState state, double delta_alpha, double delta_beta) {
	if (!std::isfinite(delta_alpha) || !std::isfinite(delta_beta)) {
		throw NumericError("update_coefficients: non-finite correction");
	}
	state.alpha = sigmoid(state.i_alpha + delta_alpha);
	state.beta = sigmoid(state.i_beta + delta_beta);
	return state;
}

Eigen::VectorXd seasonal_window(const EsState &state, std::size_t offset, std::size_t length) {
	if (offset + length > kSeasonLength) {
		throw ValidationError("seasonal_window: range [" + std::to_string(offset) + ", " +
		                      std::to_string(offset + length) + ") exceeds the 168-hour ring");
	}
	Eigen::VectorXd out(static_cast<Eigen::Index>(length));
	for (std::size_t k = 0; k < length; ++k) {
		out(static_cast<Eigen::Index>(k)) = state.seasonal_ahead(offset + k);
	}
	return out;
}

void validate(const EsState &state) {
	if (!(state.level > 0.0) || !std::isfinite(state.level)) {
		throw ValidationError("EsState: level must be positive");
	}
	for (double s : state.seasonal) {
		if (!(s > 0.0) || !std::isfinite(s)) {
			throw ValidationError("EsState: seasonal factors must be positive");
		}
	}
	if (!(state.alpha > 0.0 && state.alpha < 1.0) || !(state.beta > 0.0 && state.beta < 1.0)) {
		throw ValidationError("EsState: coefficients must lie in (0, 1)");
	}
	if (state.head >= kSeasonLength) {
		throw ValidationError("EsState: ring head out of range");
	}
}

} // namespace esdrnn::es
