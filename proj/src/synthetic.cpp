#include "esdrnn/synthetic.hpp"

#include "esdrnn/errors.hpp"
#include "esdrnn/random.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace esdrnn {

std::vector<HourlySeries> generate_synthetic(const SyntheticSpec &spec) {
	if (spec.series_count < 1 || spec.days < 1) {
		throw ValidationError("synthetic: series_count and days must be positive");
	}
	if (!(spec.noise >= 0.0) || !(spec.yearly_amplitude >= 0.0 && spec.yearly_amplitude < 0.5)) {
		throw ValidationError("synthetic: noise must be >= 0 and yearly_amplitude in [0, 0.5)");
	}
	constexpr double two_pi = 2.0 * std::numbers::pi;
	Rng rng(spec.seed);
	std::vector<HourlySeries> out;
	for (int i = 0; i < spec.series_count; ++i) {
		const double level = std::exp(uniform(rng, std::log(3000.0), std::log(30000.0)));
		const double a1 = uniform(rng, 0.10, 0.20);
		const double a2 = uniform(rng, 0.03, 0.08);
		const double phi1 = uniform(rng, 12.0, 18.0);
		const double phi2 = uniform(rng, 8.0, 11.0);
		std::array<double, 7> weekday{};
		for (int d = 0; d < 5; ++d) {
			weekday[d] = 1.0 + uniform(rng, -0.02, 0.02);
		}
		weekday[5] = uniform(rng, 0.88, 0.93);
		weekday[6] = uniform(rng, 0.80, 0.87);
		const double yearly = spec.yearly_amplitude * uniform(rng, 0.75, 1.25);
		const double yearly_phase = uniform(rng, 0.0, 365.25);

		HourlySeries s;
		s.id = "S" + std::to_string(i + 1);
		s.start = spec.start;
		s.values.reserve(static_cast<std::size_t>(spec.days) * 24);
		for (int k = 0; k < spec.days * 24; ++k) {
			const Timestamp t = spec.start + k;
			const int h = t.hour_of_day();
			const int dow = calendar_for(t).day_of_week;
			const double day = static_cast<double>(t.hours) / 24.0;
			const double weekend = dow >= 5 ? 0.8 : 1.0;
			const double profile = 1.0 + weekend * (a1 * std::cos(two_pi * (h - phi1) / 24.0) +
			                                        a2 * std::cos(2.0 * two_pi * (h - phi2) / 24.0));
			const double season = 1.0 + yearly * std::cos(two_pi * (day - yearly_phase) / 365.25);
			const double clean = level * profile * weekday[dow] * season;
			const double noisy = clean + spec.noise * level * standard_normal(rng);
			s.values.push_back(std::max(noisy, 0.05 * level));
		}
		out.push_back(std::move(s));
	}
	return out;
}

} // namespace esdrnn
