#include "esdrnn/diagnostics.hpp"

#include "esdrnn/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <ostream>

namespace esdrnn {

std::vector<double> harmonic_contributions(std::span<const double> values) {
	const std::size_t n = values.size();
	if (n < 2) {
		throw ValidationError("harmonic_contributions: need at least 2 values");
	}
	const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
	std::vector<double> centered(n);
	double var = 0.0;
	for (std::size_t i = 0; i < n; ++i) {
		centered[i] = values[i] - mean;
		var += centered[i] * centered[i];
	}
	var /= static_cast<double>(n);
	if (var <= 0.0) {
		throw ValidationError("harmonic_contributions: zero variance");
	}

	Eigen::FFT<double> fft;
	std::vector<std::complex<double>> spectrum;
	fft.fwd(spectrum, centered);

	const double dn = static_cast<double>(n);
	std::vector<double> out;
	out.reserve(n / 2);
	for (std::size_t k = 1; k <= n / 2; ++k) {
		const double mag = std::abs(spectrum[k]);
		if (2 * k == n) {
			const double a = mag / dn;
			out.push_back(100.0 * a * a / var);
		} else {
			const double a = 2.0 * mag / dn;
			out.push_back(100.0 * a * a / (2.0 * var));
		}
	}
	return out;
}

namespace {

std::optional<double> harmonic_at_period(const std::vector<double> &h, std::size_t n, double period) {
	const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) / period));
	if (k == 0 || k > h.size()) {
		return std::nullopt;
	}
	return h[k - 1];
}

double mean_of(std::span<const double> v) {
	return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

SeriesDiagnostics diagnose(const HourlySeries &series, std::size_t top_k) {
	SeriesDiagnostics d;
	d.series_id = series.id;

	// Align on the first midnight so days are calendar days.
	const std::size_t offset = static_cast<std::size_t>((24 - series.start.hour_of_day()) % 24);
	if (series.size() <= offset) {
		return d;
	}
	const std::span<const double> all(series.values);
	const std::span<const double> aligned = all.subspan(offset);
	const std::size_t n_days = aligned.size() / 24;

	std::vector<double> daily_means;
	double v_sum = 0.0;
	for (std::size_t day = 0; day < n_days; ++day) {
		const auto block = aligned.subspan(day * 24, 24);
		v_sum += variation_coefficient(block);
		daily_means.push_back(mean_of(block));
	}
	if (n_days > 0) {
		d.v_daily = v_sum / static_cast<double>(n_days);
	}

	const std::size_t n_weeks = n_days / 7;
	std::vector<double> weekly_means;
	if (n_weeks > 0) {
		double acc = 0.0;
		for (std::size_t w = 0; w < n_weeks; ++w) {
			const auto block = std::span<const double>(daily_means).subspan(w * 7, 7);
			acc += variation_coefficient(block);
			weekly_means.push_back(mean_of(block));
		}
		d.v_weekly = acc / static_cast<double>(n_weeks);
	}

	const std::size_t n_years = n_weeks / 52;
	if (n_years > 0) {
		double acc = 0.0;
		for (std::size_t y = 0; y < n_years; ++y) {
			acc += variation_coefficient(std::span<const double>(weekly_means).subspan(y * 52, 52));
		}
		d.v_yearly = acc / static_cast<double>(n_years);
	}

	if (n_days >= 8) {
		double acc = 0.0;
		std::size_t count = 0;
		for (std::size_t day = 0; day + 7 < n_days; ++day) {
			try {
				acc += daily_pattern_distance(aligned.subspan(day * 24, 24), aligned.subspan((day + 7) * 24, 24));
				++count;
			} catch (const ValidationError &) {
				// flat days carry no pattern
			}
		}
		if (count > 0) {
			d.mean_pattern_distance = acc / static_cast<double>(count);
		}
	}

	if (series.size() >= 2) {
		std::vector<double> h;
		try {
			h = harmonic_contributions(all);
		} catch (const ValidationError &) {
			return d; // constant series: no spectrum
		}
		const std::size_t n = series.size();
		d.h_daily = harmonic_at_period(h, n, 24.0);
		d.h_weekly = harmonic_at_period(h, n, 168.0);
		d.h_yearly = harmonic_at_period(h, n, 8766.0);
		d.h_half_yearly = harmonic_at_period(h, n, 4383.0);

		std::vector<std::size_t> idx(h.size());
		std::iota(idx.begin(), idx.end(), std::size_t{0});
		const std::size_t k = std::min(top_k, idx.size());
		std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
		                  [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
		for (std::size_t i = 0; i < k; ++i) {
			const std::size_t harmonic = idx[i] + 1;
			d.top_harmonics.push_back(
			    {harmonic, static_cast<double>(n) / static_cast<double>(harmonic), h[idx[i]]});
		}
	}
	return d;
}

void write_diagnostics_csv(std::ostream &out, std::span<const SeriesDiagnostics> diags) {
	out << "series_id,metric,value\n";
	auto row = [&](const std::string &id, const std::string &metric, const std::optional<double> &v) {
		if (v) {
			out << id << ',' << metric << ',' << format_double(*v) << '\n';
		}
	};
	for (const auto &d : diags) {
		row(d.series_id, "v_d", d.v_daily);
		row(d.series_id, "v_w", d.v_weekly);
		row(d.series_id, "v_y", d.v_yearly);
		row(d.series_id, "h_daily", d.h_daily);
		row(d.series_id, "h_weekly", d.h_weekly);
		row(d.series_id, "h_half_yearly", d.h_half_yearly);
		row(d.series_id, "h_yearly", d.h_yearly);
		for (std::size_t i = 0; i < d.top_harmonics.size(); ++i) {
			const std::string tag = "h_top" + std::to_string(i + 1);
			row(d.series_id, tag, d.top_harmonics[i].percent);
			row(d.series_id, tag + "_period_hours", d.top_harmonics[i].period_hours);
		}
		row(d.series_id, "pattern_distance_mean", d.mean_pattern_distance);
	}
}

} // namespace esdrnn
