#include "esdrnn/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace esdrnn {

double quantile(std::vector<double> sample, double q) {
	if (sample.empty()) {
		throw ValidationError("quantile: empty sample");
	}
	if (!(q >= 0.0 && q <= 1.0)) {
		throw DomainError("quantile: q must lie in [0, 1]");
	}
	std::sort(sample.begin(), sample.end());
	const double pos = q * static_cast<double>(sample.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const std::size_t hi = std::min(lo + 1, sample.size() - 1);
	const double frac = pos - static_cast<double>(lo);
	return sample[lo] + frac * (sample[hi] - sample[lo]);
}

ErrorSummary summarize_errors(std::span<const double> actuals, std::span<const double> forecasts,
                              std::span<const double> lower, std::span<const double> upper) {
	const std::size_t n = actuals.size();
	if (forecasts.size() != n) {
		throw ValidationError("metrics: " + std::to_string(n) + " actuals but " + std::to_string(forecasts.size()) +
		                      " forecasts");
	}
	if (lower.size() != upper.size() || (!lower.empty() && lower.size() != n)) {
		throw ValidationError("metrics: interval bounds must match the actuals");
	}
	if (n == 0) {
		throw ValidationError("metrics: no observations");
	}
	std::vector<double> ape(n);
	std::vector<double> pe(n);
	double sq = 0.0;
	for (std::size_t i = 0; i < n; ++i) {
		const double z = actuals[i];
		if (!(z > 0.0)) {
			throw DomainError("metrics: actual values must be positive, got " + std::to_string(z) + " at index " +
			                  std::to_string(i));
		}
		const double e = z - forecasts[i];
		pe[i] = 100.0 * e / z;
		ape[i] = std::abs(pe[i]);
		sq += e * e;
	}
	ErrorSummary s;
	s.count = n;
	const double dn = static_cast<double>(n);
	s.mape = std::accumulate(ape.begin(), ape.end(), 0.0) / dn;
	s.mdape = quantile(ape, 0.5);
	s.iqrape = quantile(ape, 0.75) - quantile(ape, 0.25);
	s.rmse = std::sqrt(sq / dn);
	s.mpe = std::accumulate(pe.begin(), pe.end(), 0.0) / dn;
	double var = 0.0;
	for (double v : pe) {
		var += (v - s.mpe) * (v - s.mpe);
	}
	s.stdpe = std::sqrt(var / dn);
	if (!lower.empty()) {
		std::size_t below = 0;
		std::size_t above = 0;
		for (std::size_t i = 0; i < n; ++i) {
			if (actuals[i] < lower[i]) {
				++below;
			} else if (actuals[i] > upper[i]) {
				++above;
			}
		}
		s.has_intervals = true;
		s.pi_below = 100.0 * static_cast<double>(below) / dn;
		s.pi_above = 100.0 * static_cast<double>(above) / dn;
		s.pi_inside = 100.0 * static_cast<double>(n - below - above) / dn;
	}
	return s;
}

namespace {

ErrorSummary summarize_records(std::span<const EvaluationRecord *const> records) {
	std::vector<double> z, f, lo, hi;
	const bool intervals = !records.empty() && records.front()->lower && records.front()->upper;
	for (const auto *r : records) {
		z.push_back(r->actual);
		f.push_back(r->point);
		if (intervals) {
			if (!r->lower || !r->upper) {
				throw ValidationError("metrics: interval bounds present for some hours only");
			}
			lo.push_back(*r->lower);
			hi.push_back(*r->upper);
		}
	}
	return summarize_errors(z, f, lo, hi);
}

template <typename KeyFn>
std::map<int, ErrorSummary> breakdown(std::span<const EvaluationRecord> records, KeyFn key) {
	std::map<int, std::vector<const EvaluationRecord *>> groups;
	for (const auto &r : records) {
		groups[key(r)].push_back(&r);
	}
	std::map<int, ErrorSummary> out;
	for (const auto &[k, g] : groups) {
		out[k] = summarize_records(g);
	}
	return out;
}

nlohmann::ordered_json to_json(const ErrorSummary &s) {
	nlohmann::ordered_json j;
	j["count"] = s.count;
	j["MAPE"] = s.mape;
	j["MdAPE"] = s.mdape;
	j["IqrAPE"] = s.iqrape;
	j["RMSE"] = s.rmse;
	j["MPE"] = s.mpe;
	j["StdPE"] = s.stdpe;
	if (s.has_intervals) {
		j["pi_inside"] = s.pi_inside;
		j["pi_below"] = s.pi_below;
		j["pi_above"] = s.pi_above;
	} else {
		j["pi_inside"] = nullptr;
		j["pi_below"] = nullptr;
		j["pi_above"] = nullptr;
	}
	return j;
}

} // namespace

MetricsReport compute_metrics(std::span<const EvaluationRecord> records) {
	std::vector<const EvaluationRecord *> all;
	for (const auto &r : records) {
		all.push_back(&r);
	}
	MetricsReport m;
	m.overall = summarize_records(all);
	m.by_hour = breakdown(records, [](const EvaluationRecord &r) { return r.time.hour_of_day(); });
	m.by_weekday = breakdown(records, [](const EvaluationRecord &r) { return calendar_for(r.time).day_of_week; });
	m.by_month = breakdown(records, [](const EvaluationRecord &r) { return r.time.month(); });
	return m;
}

Eigen::VectorXd naive_forecast(const HourlySeries &series, Timestamp target_day) {
	const std::int64_t target = target_day - series.start;
	if (target < kInputWindow) {
		throw ValidationError("naive: series '" + series.id + "' needs 7 days of history before " +
		                      target_day.date_string());
	}
	if (target - kInputWindow + kHorizon > static_cast<std::int64_t>(series.size())) {
		throw ValidationError("naive: series '" + series.id + "' lacks the day one week before " +
		                      target_day.date_string());
	}
	return Eigen::Map<const Eigen::VectorXd>(series.values.data() + (target - kInputWindow), kHorizon);
}

std::vector<ForecastBundle> naive_forecasts(const HourlySeries &series, Timestamp first_day, Timestamp last_day) {
	std::vector<ForecastBundle> out;
	for (Timestamp day = first_day; day <= last_day; day = day + kHorizon) {
		ForecastBundle b;
		b.series_id = series.id;
		b.day = day;
		b.point = naive_forecast(series, day);
		b.lower = b.point;
		b.upper = b.point;
		out.push_back(std::move(b));
	}
	return out;
}

std::vector<EvaluationRecord> match_forecasts(std::span<const ForecastBundle> forecasts,
                                              std::span<const HourlySeries> actuals, bool with_intervals,
                                              std::vector<std::string> *unmatched) {
	std::map<std::string, const HourlySeries *> by_id;
	for (const auto &s : actuals) {
		by_id[s.id] = &s;
	}
	std::vector<EvaluationRecord> out;
	for (const auto &b : forecasts) {
		auto it = by_id.find(b.series_id);
		for (Eigen::Index h = 0; h < b.point.size(); ++h) {
			const Timestamp t = b.day + h;
			const std::int64_t idx = it == by_id.end() ? -1 : it->second->index_of(t);
			if (idx < 0) {
				if (unmatched) {
					unmatched->push_back(b.series_id + "@" + t.to_string());
				}
				continue;
			}
			EvaluationRecord r;
			r.series_id = b.series_id;
			r.time = t;
			r.actual = it->second->values[static_cast<std::size_t>(idx)];
			r.point = b.point(h);
			if (with_intervals) {
				r.lower = b.lower(h);
				r.upper = b.upper(h);
			}
			out.push_back(std::move(r));
		}
	}
	return out;
}

EvaluationResult evaluate(std::span<const EvaluationRecord> records) {
	std::map<std::string, std::vector<EvaluationRecord>> groups;
	for (const auto &r : records) {
		groups[r.series_id].push_back(r);
	}
	if (groups.empty()) {
		throw ValidationError("evaluate: no matched forecasts");
	}
	EvaluationResult res;
	ErrorSummary &m = res.cross_series_mean;
	for (const auto &[id, rs] : groups) {
		const MetricsReport rep = compute_metrics(rs);
		const ErrorSummary &o = rep.overall;
		m.count += o.count;
		m.mape += o.mape;
		m.mdape += o.mdape;
		m.iqrape += o.iqrape;
		m.rmse += o.rmse;
		m.mpe += o.mpe;
		m.stdpe += o.stdpe;
		m.has_intervals = o.has_intervals;
		m.pi_inside += o.pi_inside;
		m.pi_below += o.pi_below;
		m.pi_above += o.pi_above;
		res.per_series.emplace(id, rep);
	}
	const double n = static_cast<double>(groups.size());
	for (double *v : {&m.mape, &m.mdape, &m.iqrape, &m.rmse, &m.mpe, &m.stdpe, &m.pi_inside, &m.pi_below, &m.pi_above}) {
		*v /= n;
	}
	return res;
}

void write_report_json(const std::filesystem::path &path, const EvaluationResult &result) {
	nlohmann::ordered_json j;
	j["cross_series_mean"] = to_json(result.cross_series_mean);
	nlohmann::ordered_json per = nlohmann::ordered_json::object();
	for (const auto &[id, rep] : result.per_series) {
		per[id] = to_json(rep.overall);
	}
	j["per_series"] = per;
	std::ofstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot write " + path.string());
	}
	f << j.dump(2) << '\n';
}

void write_breakdown_csv(const std::filesystem::path &path, const EvaluationResult &result) {
	std::ofstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot write " + path.string());
	}
	f << "series_id,breakdown,key,count,mape,mdape,iqrape,rmse,mpe,stdpe,pi_inside,pi_below,pi_above\n";
	auto row = [&](const std::string &id, const char *kind, int key, const ErrorSummary &s) {
		f << id << ',' << kind << ',' << key << ',' << s.count << ',' << format_double(s.mape) << ','
		  << format_double(s.mdape) << ',' << format_double(s.iqrape) << ',' << format_double(s.rmse) << ','
		  << format_double(s.mpe) << ',' << format_double(s.stdpe) << ',';
		if (s.has_intervals) {
			f << format_double(s.pi_inside) << ',' << format_double(s.pi_below) << ',' << format_double(s.pi_above);
		} else {
			f << ",,";
		}
		f << '\n';
	};
	for (const auto &[id, rep] : result.per_series) {
		for (const auto &[k, s] : rep.by_hour) {
			row(id, "hour", k, s);
		}
		for (const auto &[k, s] : rep.by_weekday) {
			row(id, "weekday", k, s);
		}
		for (const auto &[k, s] : rep.by_month) {
			row(id, "month", k, s);
		}
	}
}

} // namespace esdrnn
