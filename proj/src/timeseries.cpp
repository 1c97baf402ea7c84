#include "esdrnn/timeseries.hpp"

#include "esdrnn/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace esdrnn {

namespace {

using std::chrono::days;
using std::chrono::sys_days;
using std::chrono::year_month_day;

sys_days to_days(Timestamp t) {
	// floor division keeps pre-epoch timestamps on the right day
	const std::int64_t d = (t.hours >= 0) ? t.hours / 24 : -((-t.hours + 23) / 24);
	return sys_days{days{d}};
}

bool parse_int(std::string_view s, int &out) {
	auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
	return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string two_digits(unsigned v) {
	std::string s = std::to_string(v);
	return s.size() < 2 ? "0" + s : s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
	std::vector<std::string_view> out;
	std::size_t begin = 0;
	while (true) {
		const std::size_t pos = line.find(sep, begin);
		if (pos == std::string_view::npos) {
			out.push_back(line.substr(begin));
			return out;
		}
		out.push_back(line.substr(begin, pos - begin));
		begin = pos + 1;
	}
}

std::string_view trim(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
		s.remove_prefix(1);
	}
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
		s.remove_suffix(1);
	}
	return s;
}

double population_variance(std::span<const double> values) {
	const double n = static_cast<double>(values.size());
	const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
	double ss = 0.0;
	for (double v : values) {
		ss += (v - mean) * (v - mean);
	}
	return ss / n;
}

} // namespace

Timestamp Timestamp::parse(std::string_view text) {
	text = trim(text);
	// YYYY-MM-DDTHH:00:00
	if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
	    text[16] != ':') {
		throw ValidationError("malformed timestamp '" + std::string(text) + "', expected YYYY-MM-DDTHH:00:00");
	}
	int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
	if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d) ||
	    !parse_int(text.substr(11, 2), h) || !parse_int(text.substr(14, 2), mi) ||
	    !parse_int(text.substr(17, 2), se)) {
		throw ValidationError("malformed timestamp '" + std::string(text) + "'");
	}
	if (mi != 0 || se != 0) {
		throw ValidationError("timestamp '" + std::string(text) + "' is not on the hour");
	}
	const year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
	                         std::chrono::day{static_cast<unsigned>(d)}};
	if (!ymd.ok() || h < 0 || h > 23) {
		throw ValidationError("invalid calendar timestamp '" + std::string(text) + "'");
	}
	return from_date(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h);
}

Timestamp Timestamp::from_date(int year, unsigned month, unsigned day, int hour) {
	const sys_days sd{year_month_day{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}}};
	return Timestamp{static_cast<std::int64_t>(sd.time_since_epoch().count()) * 24 + hour};
}

std::string Timestamp::date_string() const {
	const year_month_day ymd{to_days(*this)};
	return std::to_string(static_cast<int>(ymd.year())) + "-" + two_digits(static_cast<unsigned>(ymd.month())) +
	       "-" + two_digits(static_cast<unsigned>(ymd.day()));
}

std::string Timestamp::to_string() const {
	return date_string() + "T" + two_digits(static_cast<unsigned>(hour_of_day())) + ":00:00";
}

int Timestamp::hour_of_day() const {
	const std::int64_t h = hours % 24;
	return static_cast<int>(h < 0 ? h + 24 : h);
}

int Timestamp::month() const {
	return static_cast<int>(static_cast<unsigned>(year_month_day{to_days(*this)}.month()));
}

std::int64_t HourlySeries::index_of(Timestamp t) const {
	const std::int64_t i = t - start;
	return (i >= 0 && i < static_cast<std::int64_t>(values.size())) ? i : -1;
}

HourlySeries HourlySeries::slice(std::size_t begin, std::size_t end) const {
	if (begin > end || end > values.size()) {
		throw ValidationError("series '" + id + "': slice out of range");
	}
	return HourlySeries{id, at(begin), std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(begin),
	                                                       values.begin() + static_cast<std::ptrdiff_t>(end))};
}

Eigen::VectorXd CalendarFeatures::one_hot() const {
	Eigen::VectorXd v = Eigen::VectorXd::Zero(kWidth);
	v(day_of_week) = 1.0;
	v(kWeekDays + day_of_month) = 1.0;
	v(kWeekDays + kMonthDays + week_of_year) = 1.0;
	return v;
}

CalendarFeatures calendar_for(Timestamp t) {
	const sys_days sd = to_days(t);
	const year_month_day ymd{sd};
	const std::chrono::weekday wd{sd};
	const int dow = static_cast<int>(wd.iso_encoding()) - 1; // Monday = 0

	// ISO week: the week containing this date's Thursday, numbered within that Thursday's year.
	const sys_days thursday = sd + days{3 - dow};
	const year_month_day thu{thursday};
	const sys_days jan1{thu.year() / std::chrono::January / 1};
	const int iso_week = static_cast<int>((thursday - jan1).count() / 7) + 1;

	CalendarFeatures c;
	c.day_of_week = dow;
	c.day_of_month = static_cast<int>(static_cast<unsigned>(ymd.day())) - 1;
	c.week_of_year = std::min(iso_week, CalendarFeatures::kYearWeeks) - 1;
	return c;
}

std::vector<HourlySeries> read_csv(std::istream &in, const std::string &source) {
	std::string line;
	if (!std::getline(in, line)) {
		throw ValidationError(source + ": empty file");
	}
	if (trim(line) != "series_id,timestamp,value") {
		throw ValidationError(source + ": expected header 'series_id,timestamp,value'");
	}

	struct Row {
		Timestamp t;
		double v;
	};
	std::vector<std::string> order;
	std::map<std::string, std::vector<Row>> rows;
	std::size_t line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		const std::string_view l = trim(line);
		if (l.empty()) {
			continue;
		}
		const auto fields = split(l, ',');
		if (fields.size() != 3) {
			throw ValidationError(source + ":" + std::to_string(line_no) + ": expected 3 fields");
		}
		const std::string id(trim(fields[0]));
		if (id.empty()) {
			throw ValidationError(source + ":" + std::to_string(line_no) + ": empty series_id");
		}
		Timestamp t;
		try {
			t = Timestamp::parse(fields[1]);
		} catch (const ValidationError &e) {
			throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
		}
		const std::string_view vs = trim(fields[2]);
		double v = 0.0;
		auto [ptr, ec] = std::from_chars(vs.data(), vs.data() + vs.size(), v);
		if (ec != std::errc{} || ptr != vs.data() + vs.size() || !std::isfinite(v)) {
			throw ValidationError(source + ":" + std::to_string(line_no) + ": unparseable value '" +
			                      std::string(vs) + "'");
		}
		if (v <= 0.0) {
			throw ValidationError(source + ":" + std::to_string(line_no) + ": non-positive value for series '" +
			                      id + "' at " + t.to_string());
		}
		auto [it, inserted] = rows.try_emplace(id);
		if (inserted) {
			order.push_back(id);
		}
		it->second.push_back({t, v});
	}

	std::vector<HourlySeries> out;
	out.reserve(order.size());
	for (const auto &id : order) {
		auto &r = rows[id];
		std::stable_sort(r.begin(), r.end(), [](const Row &a, const Row &b) { return a.t < b.t; });
		HourlySeries s;
		s.id = id;
		s.start = r.front().t;
		s.values.reserve(r.size());
		for (std::size_t i = 0; i < r.size(); ++i) {
			if (i > 0) {
				const std::int64_t step = r[i].t - r[i - 1].t;
				if (step == 0) {
					throw ValidationError("series '" + id + "': duplicate hour " + r[i].t.to_string());
				}
				if (step != 1) {
					throw ValidationError("series '" + id + "': missing hour " + (r[i - 1].t + 1).to_string());
				}
			}
			s.values.push_back(r[i].v);
		}
		out.push_back(std::move(s));
	}
	return out;
}

std::vector<HourlySeries> load_csv(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ValidationError("cannot open data file " + path.string());
	}
	return read_csv(in, path.string());
}

std::string format_double(double v) {
	char buf[64];
	auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	return std::string(buf, ptr);
}

void write_csv(std::ostream &out, std::span<const HourlySeries> series) {
	out << "series_id,timestamp,value\n";
	for (const auto &s : series) {
		for (std::size_t i = 0; i < s.size(); ++i) {
			out << s.id << ',' << s.at(i).to_string() << ',' << format_double(s.values[i]) << '\n';
		}
	}
}

void write_csv(const std::filesystem::path &path, std::span<const HourlySeries> series) {
	std::ofstream out(path);
	if (!out) {
		throw ValidationError("cannot write " + path.string());
	}
	write_csv(out, series);
}

double variation_coefficient(std::span<const double> values) {
	if (values.empty()) {
		throw ValidationError("variation_coefficient: empty input");
	}
	const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
	if (mean == 0.0) {
		throw ValidationError("variation_coefficient: zero mean");
	}
	return 100.0 * std::sqrt(population_variance(values)) / mean;
}

double harmonic_contribution(std::span<const double> values, std::size_t harmonic_index) {
	const std::size_t n = values.size();
	if (n < 2) {
		throw ValidationError("harmonic_contribution: need at least 2 values");
	}
	if (harmonic_index == 0 || harmonic_index > n / 2) {
		throw ValidationError("harmonic_contribution: harmonic index out of range");
	}
	const double var = population_variance(values);
	if (var <= 0.0) {
		throw ValidationError("harmonic_contribution: zero variance");
	}
	const double w = 2.0 * M_PI * static_cast<double>(harmonic_index) / static_cast<double>(n);
	std::complex<double> x{0.0, 0.0};
	for (std::size_t t = 0; t < n; ++t) {
		const double phase = w * static_cast<double>(t);
		x += values[t] * std::complex<double>(std::cos(phase), -std::sin(phase));
	}
	const double dn = static_cast<double>(n);
	if (2 * harmonic_index == n) {
		// Nyquist term: amplitude |X|/n, no factor of two.
		const double a = std::abs(x) / dn;
		return 100.0 * a * a / var;
	}
	const double a = 2.0 * std::abs(x) / dn;
	return 100.0 * a * a / (2.0 * var);
}

double daily_pattern_distance(std::span<const double> day_a, std::span<const double> day_b) {
	if (day_a.size() != 24 || day_b.size() != 24) {
		throw ValidationError("daily_pattern_distance: each day needs exactly 24 values");
	}
	auto pattern = [](std::span<const double> d) {
		Eigen::Map<const Eigen::VectorXd> v(d.data(), 24);
		Eigen::VectorXd c = v.array() - v.mean();
		const double norm = c.norm();
		if (norm == 0.0) {
			throw ValidationError("daily_pattern_distance: constant day has no pattern");
		}
		return Eigen::VectorXd(c / norm);
	};
	return (pattern(day_a) - pattern(day_b)).norm();
}

} // namespace esdrnn
