#pragma once

// Synthetic hourly load: per-series level, a daily/weekly shape, a yearly
// sinusoid and Gaussian noise proportional to the level.

#include "esdrnn/timeseries.hpp"

#include <cstdint>
#include <vector>

namespace esdrnn {

struct SyntheticSpec {
	int series_count = 4;
	int days = 730;
	Timestamp start = Timestamp::from_date(2016, 1, 4); // a Monday
	double noise = 0.02;      // noise standard deviation as a fraction of the level
	double yearly_amplitude = 0.12;
	std::uint64_t seed = 2024;
};

std::vector<HourlySeries> generate_synthetic(const SyntheticSpec &spec);

} // namespace esdrnn
