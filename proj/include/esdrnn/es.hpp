#pragma once

// Dynamic multiplicative Holt-Winters tracker: level plus a 168-hour seasonal
// ring, with smoothing coefficients squashed through a sigmoid around fixed
// initial logits and shifted by network-produced corrections.

#include "esdrnn/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

namespace esdrnn::es {

inline constexpr std::size_t kSeasonLength = 168;

inline double sigmoid(double x) {
	return 1.0 / (1.0 + std::exp(-x));
}

/// Level/seasonality state. `seasonal[(head + k) % 168]` is the factor for the
/// k-th hour after the last processed one. Scalar is double, or an automatic
/// differentiation scalar when tangents w.r.t. the coefficients are needed.
template <typename Scalar>
struct BasicEsState {
	Scalar level{};
	std::array<Scalar, kSeasonLength> seasonal{};
	std::size_t head = 0;
	Scalar alpha{};
	Scalar beta{};
	double i_alpha = 0.0;
	double i_beta = 0.0;

	const Scalar &seasonal_ahead(std::size_t k) const {
		return seasonal[(head + k) % kSeasonLength];
	}
};

using EsState = BasicEsState<double>;

/// Level = mean of the first 168 values, seasonal[k] = value[k] / level.
/// The prefix is consumed: the next processed hour has the phase of prefix[0].
EsState init_state(std::span<const double> prefix, double i_alpha, double i_beta);

/// One hourly recursion, in place. The level uses the current slot's seasonal
/// factor; the factor written 168 hours ahead uses the freshly updated level.
template <typename Scalar>
void advance_hour(BasicEsState<Scalar> &s, double z) {
	if (!(z > 0.0) || !std::isfinite(z)) {
		throw DomainError("hw_step: observation must be positive and finite, got " + std::to_string(z));
	}
	Scalar &slot = s.seasonal[s.head];
	const Scalar new_level = s.alpha * (z / slot) + (Scalar(1) - s.alpha) * s.level;
	slot = s.beta * (z / new_level) + (Scalar(1) - s.beta) * slot;
	s.level = new_level;
	s.head = (s.head + 1) % kSeasonLength;
}

template <typename Scalar>
BasicEsState<Scalar> hw_step(BasicEsState<Scalar> state, double z) {
	advance_hour(state, z);
	return state;
}

/// alpha = sigmoid(i_alpha + delta_alpha), beta = sigmoid(i_beta + delta_beta).
EsState update_coefficients(EsState state, double delta_alpha, double delta_beta);

/// Seasonal factors predicted for hours [offset, offset + length) after the last processed hour.
Eigen::VectorXd seasonal_window(const EsState &state, std::size_t offset, std::size_t length);

/// Throws ValidationError if the state violates its invariants.
void validate(const EsState &state);

} // namespace esdrnn::es
