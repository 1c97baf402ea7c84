#include "esdrnn/forecasting.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace esdrnn {

namespace {

ForecastBundle bundle_of(const HourlySeries &series, const StepResult &step) {
	const TrainingSample &s = step.sample;
	ForecastBundle b;
	b.series_id = series.id;
	b.day = s.forecast_start;
	b.point = postprocess(step.output.x_hat, s.z_bar, s.s_hat_out_raw);
	b.lower = postprocess(step.output.x_lower, s.z_bar, s.s_hat_out_raw);
	b.upper = postprocess(step.output.x_upper, s.z_bar, s.s_hat_out_raw);
	return b;
}

SeriesCursor replay_to(const Model &model, const HourlySeries &history, Timestamp target_day, int warmup_weeks) {
	if (warmup_weeks < 2) {
		throw ValidationError("forecast: warm-up must cover at least two weeks");
	}
	if (target_day.hour_of_day() != 0) {
		throw ValidationError("forecast: target day must start at midnight, got " + target_day.to_string());
	}
	const std::int64_t needed = static_cast<std::int64_t>(warmup_weeks) * kInputWindow;
	const std::int64_t target = target_day - history.start;
	if (target < needed) {
		throw ValidationError("forecast: series '" + history.id + "' needs " + std::to_string(needed) +
		                      " hours of history before " + target_day.to_string() + ", has " +
		                      std::to_string(std::max<std::int64_t>(target, 0)));
	}
	if (target > static_cast<std::int64_t>(history.size())) {
		throw ValidationError("forecast: history of series '" + history.id + "' ends before " +
		                      target_day.to_string());
	}
	SeriesCursor cur = start_cursor(model, history, static_cast<std::size_t>(target - needed));
	const int replay = 7 * (warmup_weeks - 1);
	for (int k = 0; k < replay; ++k) {
		advance(model, cur);
	}
	return cur;
}

} // namespace

ForecastBundle forecast_day(const Model &model, const HourlySeries &history, Timestamp target_day, int warmup_weeks) {
	SeriesCursor cur = replay_to(model, history, target_day, warmup_weeks);
	return bundle_of(history, forward_step(model, cur));
}

std::vector<ForecastBundle> rolling_forecast(const Model &model, const HourlySeries &history, Timestamp first_day,
                                             Timestamp last_day, int warmup_weeks) {
	if (last_day < first_day) {
		throw ValidationError("forecast: empty date range");
	}
	SeriesCursor cur = replay_to(model, history, first_day, warmup_weeks);
	std::vector<ForecastBundle> out;
	for (Timestamp day = first_day;; day = day + kHorizon) {
		const StepResult step = forward_step(model, cur);
		out.push_back(bundle_of(history, step));
		if (day + kHorizon > last_day) {
			break;
		}
		if ((day + kHorizon) - history.start > static_cast<std::int64_t>(history.size())) {
			throw ValidationError("forecast: actual load of series '" + history.id + "' missing for " +
			                      day.date_string());
		}
		commit_step(model, cur, step);
	}
	return out;
}

ForecastBundle average_bundles(std::span<const ForecastBundle> members) {
	if (members.empty()) {
		throw ValidationError("forecast_ensemble: no members");
	}
	ForecastBundle mean = members.front();
	for (std::size_t i = 1; i < members.size(); ++i) {
		const ForecastBundle &m = members[i];
		if (m.series_id != mean.series_id || m.day != mean.day) {
			throw ValidationError("forecast_ensemble: members forecast different days or series");
		}
		mean.point += m.point;
		mean.lower += m.lower;
		mean.upper += m.upper;
	}
	const double n = static_cast<double>(members.size());
	mean.point /= n;
	mean.lower /= n;
	mean.upper /= n;
	return mean;
}

ForecastBundle forecast_ensemble(std::span<const Model> models, const HourlySeries &history, Timestamp target_day,
                                 int warmup_weeks) {
	if (models.empty()) {
		throw ValidationError("forecast_ensemble: no models");
	}
	std::vector<ForecastBundle> members;
	for (const auto &m : models) {
		members.push_back(forecast_day(m, history, target_day, warmup_weeks));
	}
	return average_bundles(members);
}

std::vector<ForecastBundle> rolling_forecast_ensemble(std::span<const Model> models, const HourlySeries &history,
                                                      Timestamp first_day, Timestamp last_day, int warmup_weeks) {
	if (models.empty()) {
		throw ValidationError("forecast_ensemble: no models");
	}
	std::vector<std::vector<ForecastBundle>> runs;
	for (const auto &m : models) {
		runs.push_back(rolling_forecast(m, history, first_day, last_day, warmup_weeks));
	}
	std::vector<ForecastBundle> out;
	std::vector<ForecastBundle> day_members(models.size());
	for (std::size_t d = 0; d < runs.front().size(); ++d) {
		for (std::size_t m = 0; m < runs.size(); ++m) {
			day_members[m] = runs[m][d];
		}
		out.push_back(average_bundles(day_members));
	}
	return out;
}

void write_forecast_csv(std::ostream &out, std::span<const ForecastBundle> bundles) {
	out << "series_id,timestamp,point,lower,upper\n";
	for (const auto &b : bundles) {
		for (Eigen::Index h = 0; h < b.point.size(); ++h) {
			out << b.series_id << ',' << (b.day + h).to_string() << ',' << format_double(b.point(h)) << ','
			    << format_double(b.lower(h)) << ',' << format_double(b.upper(h)) << '\n';
		}
	}
}

void write_forecast_csv(const std::filesystem::path &path, std::span<const ForecastBundle> bundles) {
	std::ofstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot write " + path.string());
	}
	write_forecast_csv(f, bundles);
}

std::vector<ForecastBundle> read_forecast_csv(std::istream &in, const std::string &source) {
	std::string line;
	if (!std::getline(in, line) || line != "series_id,timestamp,point,lower,upper") {
		throw ValidationError(source + ": expected header 'series_id,timestamp,point,lower,upper'");
	}
	struct Row {
		double point, lower, upper;
	};
	std::vector<std::string> order;
	std::map<std::string, std::map<Timestamp, Row>> rows;
	std::size_t line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) {
			continue;
		}
		std::vector<std::string> f;
		std::stringstream ss(line);
		std::string cell;
		while (std::getline(ss, cell, ',')) {
			f.push_back(cell);
		}
		const std::string where = source + ":" + std::to_string(line_no);
		if (f.size() != 5) {
			throw ValidationError(where + ": expected 5 fields");
		}
		Row r{};
		try {
			r = Row{std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
		} catch (const std::exception &) {
			throw ValidationError(where + ": unparseable number");
		}
		Timestamp t;
		try {
			t = Timestamp::parse(f[1]);
		} catch (const std::exception &e) {
			throw ValidationError(where + ": " + e.what());
		}
		if (!rows.count(f[0])) {
			order.push_back(f[0]);
		}
		if (!rows[f[0]].emplace(t, r).second) {
			throw ValidationError(where + ": duplicate hour " + f[1] + " for series '" + f[0] + "'");
		}
	}

	std::vector<ForecastBundle> out;
	for (const auto &id : order) {
		const auto &hours = rows[id];
		for (auto it = hours.begin(); it != hours.end();) {
			ForecastBundle b;
			b.series_id = id;
			b.day = it->first.day_start();
			b.point.resize(kHorizon);
			b.lower.resize(kHorizon);
			b.upper.resize(kHorizon);
			for (int h = 0; h < kHorizon; ++h, ++it) {
				if (it == hours.end() || it->first != b.day + h) {
					throw ValidationError(source + ": series '" + id + "' has an incomplete day " +
					                      b.day.date_string());
				}
				b.point(h) = it->second.point;
				b.lower(h) = it->second.lower;
				b.upper(h) = it->second.upper;
			}
			out.push_back(std::move(b));
		}
	}
	return out;
}

std::vector<ForecastBundle> load_forecast_csv(const std::filesystem::path &path) {
	std::ifstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot open " + path.string());
	}
	return read_forecast_csv(f, path.string());
}

} // namespace esdrnn
