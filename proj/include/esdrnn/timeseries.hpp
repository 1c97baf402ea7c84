#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace esdrnn {

/// Naive local time at hour granularity, stored as hours since 1970-01-01T00:00.
struct Timestamp {
	std::int64_t hours = 0;

	static Timestamp parse(std::string_view text); // YYYY-MM-DDTHH:00:00
	static Timestamp from_date(int year, unsigned month, unsigned day, int hour = 0);
	std::string to_string() const;
	std::string date_string() const; // YYYY-MM-DD

	int hour_of_day() const;
	int month() const; // 1-12
	Timestamp day_start() const {
		return Timestamp{hours - hour_of_day()};
	}

	friend Timestamp operator+(Timestamp t, std::int64_t h) {
		return Timestamp{t.hours + h};
	}
	friend std::int64_t operator-(Timestamp a, Timestamp b) {
		return a.hours - b.hours;
	}
	auto operator<=>(const Timestamp &) const = default;
};

/// One load series: strictly hourly, gap-free, positive readings.
struct HourlySeries {
	std::string id;
	Timestamp start;
	std::vector<double> values;

	std::size_t size() const {
		return values.size();
	}
	Timestamp at(std::size_t i) const {
		return start + static_cast<std::int64_t>(i);
	}
	/// Index of a timestamp, or -1 when outside the series.
	std::int64_t index_of(Timestamp t) const;
	/// Copy of the hours [begin, end).
	HourlySeries slice(std::size_t begin, std::size_t end) const;
};

/// Calendar position of a forecasted day.
struct CalendarFeatures {
	int day_of_week = 0;  // Monday = 0
	int day_of_month = 0; // 0-30
	int week_of_year = 0; // ISO week - 1, clamped to 51

	static constexpr int kWeekDays = 7;
	static constexpr int kMonthDays = 31;
	static constexpr int kYearWeeks = 52;
	static constexpr int kWidth = kWeekDays + kMonthDays + kYearWeeks;

	/// Concatenated one-hot blocks (7 + 31 + 52).
	Eigen::VectorXd one_hot() const;
};

CalendarFeatures calendar_for(Timestamp t);

std::vector<HourlySeries> read_csv(std::istream &in, const std::string &source = "<stream>");
std::vector<HourlySeries> load_csv(const std::filesystem::path &path);
void write_csv(std::ostream &out, std::span<const HourlySeries> series);
void write_csv(const std::filesystem::path &path, std::span<const HourlySeries> series);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

// Diagnostics of load variability.

/// 100 * population standard deviation / mean.
double variation_coefficient(std::span<const double> values);

/// Share (percent) of the series variance carried by the harmonic completing
/// `harmonic_index` cycles over the whole series.
double harmonic_contribution(std::span<const double> values, std::size_t harmonic_index);

/// Contributions of all harmonics 1..n/2; entry k-1 belongs to harmonic k.
std::vector<double> harmonic_contributions(std::span<const double> values);

/// Euclidean distance between the centered, unit-length daily profiles of two days.
double daily_pattern_distance(std::span<const double> day_a, std::span<const double> day_b);

} // namespace esdrnn
