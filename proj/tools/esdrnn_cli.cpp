// esdrnn: train, forecast, evaluate and inspect hourly load models.

#include "esdrnn/checkpoint.hpp"
#include "esdrnn/diagnostics.hpp"
#include "esdrnn/evaluation.hpp"
#include "esdrnn/forecasting.hpp"
#include "esdrnn/run_config.hpp"
#include "esdrnn/synthetic.hpp"
#include "esdrnn/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace esdrnn;

namespace {

enum ExitCode { kOk = 0, kInvalid = 1, kPartial = 2, kNumeric = 3 };

Timestamp parse_day(const std::string &text) {
	if (text.size() == 10) {
		return Timestamp::parse(text + "T00:00:00");
	}
	return Timestamp::parse(text);
}

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
	std::vector<std::uint64_t> out;
	std::stringstream ss(text);
	std::string item;
	while (std::getline(ss, item, ',')) {
		try {
			std::size_t used = 0;
			out.push_back(std::stoull(item, &used));
			if (used != item.size()) {
				throw std::invalid_argument(item);
			}
		} catch (const std::exception &) {
			throw ValidationError("--seeds: '" + item + "' is not a non-negative integer");
		}
	}
	return out;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
	const std::size_t width = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
	if (width <= 1) {
		for (std::size_t i = 0; i < n; ++i) {
			fn(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::vector<std::thread> pool;
	for (std::size_t w = 0; w < width; ++w) {
		pool.emplace_back([&] {
			for (std::size_t i = next++; i < n; i = next++) {
				fn(i);
			}
		});
	}
	for (auto &t : pool) {
		t.join();
	}
}

std::vector<HourlySeries> truncate_before(std::vector<HourlySeries> data, Timestamp end) {
	for (auto &s : data) {
		const std::int64_t keep = std::clamp<std::int64_t>(end - s.start, 0, static_cast<std::int64_t>(s.size()));
		s.values.resize(static_cast<std::size_t>(keep));
	}
	return data;
}

struct TrainOptions {
	std::string config;
	std::string data;
	std::string out = "checkpoints";
	std::string seeds;
	std::string to;
	std::vector<std::string> ablations;
	bool desk_scale = false;
};

int cmd_train(const TrainOptions &o) {
	RunConfig cfg = RunConfig::defaults(o.desk_scale);
	if (!o.config.empty()) {
		cfg = load_run_config(o.config);
		if (o.desk_scale && !cfg.desk_scale) {
			throw ValidationError("--desk-scale conflicts with desk_scale=false in " + o.config);
		}
	}
	if (!o.data.empty()) {
		cfg.data_path = o.data;
	}
	if (!o.seeds.empty()) {
		cfg.seeds = parse_seeds(o.seeds);
	}
	if (!o.to.empty()) {
		cfg.train_end = parse_day(o.to);
	}
	for (const auto &a : o.ablations) {
		cfg.ablations.push_back(parse_ablation(a));
	}
	cfg.validate();
	if (cfg.data_path.empty()) {
		throw ValidationError("train: no data path (use --data or the config's \"data\" key)");
	}

	std::vector<HourlySeries> data = load_csv(cfg.data_path);
	if (cfg.train_end) {
		data = truncate_before(std::move(data), *cfg.train_end);
	}
	const TrainingData usable = select_training_series(data, cfg.schedule);
	for (const auto &id : usable.excluded) {
		std::cerr << "warning: series '" << id << "' is too short for training and is excluded\n";
	}
	if (usable.series.empty()) {
		throw ValidationError("train: no series long enough for w_o + l_o days");
	}

	fs::create_directories(o.out);
	std::ofstream log(fs::path(o.out) / "training.log", std::ios::binary);
	const std::vector<std::uint64_t> seeds = cfg.effective_seeds();
	const NetworkConfig net = cfg.effective_network();
	const EsInit es_init{cfg.i_alpha, cfg.i_beta};
	std::vector<Trainer> members = train_ensemble(net, cfg.schedule, cfg.loss, data, seeds, es_init,
	                                              [&](std::uint64_t seed, const EpochReport &r) {
		                                              const std::string line =
		                                                  "seed=" + std::to_string(seed) + " " + r.to_log_line();
		                                              std::cerr << line << '\n';
		                                              log << line << '\n';
	                                              });
	for (const auto &m : members) {
		const fs::path path = fs::path(o.out) / ("member_" + std::to_string(m.seed) + ".ckpt");
		save_checkpoint(path, make_checkpoint(cfg, m, data));
		std::cerr << "wrote " << path.string() << '\n';
	}
	std::cerr << "parameters per member: " << parameter_count(members.front().model.network) << '\n';
	return usable.excluded.empty() ? kOk : kPartial;
}

struct RangeOptions {
	std::string checkpoints;
	std::string data;
	std::string out = "forecast.csv";
	std::string from;
	std::string to;
};

int cmd_forecast(const RangeOptions &o) {
	std::vector<Model> models;
	int warmup = 0;
	for (const auto &p : list_checkpoints(o.checkpoints)) {
		Checkpoint c = load_checkpoint(p);
		warmup = c.config().schedule.w_s;
		models.push_back(std::move(c.model));
	}
	if (models.empty()) {
		throw ValidationError("forecast: no .ckpt files in " + o.checkpoints);
	}
	const std::vector<HourlySeries> data = load_csv(o.data);
	const Timestamp first = parse_day(o.from);
	const Timestamp last = parse_day(o.to.empty() ? o.from : o.to);
	if (last < first || first.hour_of_day() != 0 || last.hour_of_day() != 0) {
		throw ValidationError("forecast: --from/--to must be dates with --from <= --to");
	}

	std::vector<std::vector<ForecastBundle>> results(data.size());
	std::vector<std::string> warnings(data.size());
	parallel_for(data.size(), [&](std::size_t i) {
		const HourlySeries &s = data[i];
		// rolling forecasts need the actual load of every day but the last
		const Timestamp data_end_day = (s.start + static_cast<std::int64_t>(s.size())).day_start();
		const Timestamp stop = std::min(last, data_end_day);
		try {
			if (stop < first) {
				throw ValidationError("series '" + s.id + "' ends before " + first.date_string());
			}
			results[i] = rolling_forecast_ensemble(models, s, first, stop, warmup);
			if (stop < last) {
				warnings[i] = "series '" + s.id + "' forecast only through " + stop.date_string();
			}
		} catch (const ValidationError &e) {
			warnings[i] = e.what();
		}
	});

	std::vector<ForecastBundle> all;
	bool partial = false;
	for (std::size_t i = 0; i < data.size(); ++i) {
		if (!warnings[i].empty()) {
			std::cerr << "warning: " << warnings[i] << '\n';
			partial = true;
		}
		all.insert(all.end(), results[i].begin(), results[i].end());
	}
	if (all.empty()) {
		throw ValidationError("forecast: no series could be forecast");
	}
	write_forecast_csv(o.out, all);
	std::cerr << "wrote " << all.size() * kHorizon << " rows to " << o.out << '\n';
	return partial ? kPartial : kOk;
}

struct EvaluateOptions {
	std::string forecast;
	std::string data;
	std::string out = "report";
	bool no_intervals = false;
};

int cmd_evaluate(const EvaluateOptions &o) {
	const std::vector<ForecastBundle> forecasts = load_forecast_csv(o.forecast);
	const std::vector<HourlySeries> actuals = load_csv(o.data);
	std::vector<std::string> unmatched;
	const auto records = match_forecasts(forecasts, actuals, !o.no_intervals, &unmatched);
	if (!unmatched.empty()) {
		std::string msg = std::to_string(unmatched.size()) + " forecast rows have no actual value; first:";
		for (std::size_t i = 0; i < std::min<std::size_t>(10, unmatched.size()); ++i) {
			msg += " " + unmatched[i];
		}
		throw ValidationError(msg);
	}
	const EvaluationResult res = evaluate(records);
	fs::create_directories(o.out);
	write_report_json(fs::path(o.out) / "report.json", res);
	write_breakdown_csv(fs::path(o.out) / "breakdown.csv", res);
	const ErrorSummary &m = res.cross_series_mean;
	std::cout << "MAPE " << format_double(m.mape) << " MdAPE " << format_double(m.mdape) << " RMSE "
	          << format_double(m.rmse) << " MPE " << format_double(m.mpe);
	if (m.has_intervals) {
		std::cout << " PI_inside " << format_double(m.pi_inside);
	}
	std::cout << '\n';
	return kOk;
}

int cmd_naive(const RangeOptions &o) {
	const std::vector<HourlySeries> data = load_csv(o.data);
	const Timestamp first = parse_day(o.from);
	const Timestamp last = parse_day(o.to.empty() ? o.from : o.to);
	std::vector<ForecastBundle> all;
	bool partial = false;
	for (const auto &s : data) {
		try {
			const auto b = naive_forecasts(s, first, last);
			all.insert(all.end(), b.begin(), b.end());
		} catch (const ValidationError &e) {
			std::cerr << "warning: " << e.what() << '\n';
			partial = true;
		}
	}
	if (all.empty()) {
		throw ValidationError("naive: no series could be forecast");
	}
	write_forecast_csv(o.out, all);
	return partial ? kPartial : kOk;
}

int cmd_diagnose(const std::string &data_path, const std::string &out) {
	const std::vector<HourlySeries> data = load_csv(data_path);
	std::vector<std::optional<SeriesDiagnostics>> results(data.size());
	std::vector<std::string> errors(data.size());
	parallel_for(data.size(), [&](std::size_t i) {
		try {
			results[i] = diagnose(data[i]);
		} catch (const std::exception &e) {
			errors[i] = e.what();
		}
	});
	std::vector<SeriesDiagnostics> ok;
	bool partial = false;
	for (std::size_t i = 0; i < data.size(); ++i) {
		if (results[i]) {
			ok.push_back(*results[i]);
		} else {
			std::cerr << "warning: series '" << data[i].id << "': " << errors[i] << '\n';
			partial = true;
		}
	}
	std::ofstream file(out, std::ios::binary);
	if (!file) {
		throw ValidationError("cannot write " + out);
	}
	write_diagnostics_csv(file, ok);
	return partial ? kPartial : kOk;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Hybrid exponential smoothing and dilated RNN load forecaster"};
	app.require_subcommand(1);

	TrainOptions train;
	auto *t = app.add_subcommand("train", "Train an ensemble and write one checkpoint per member");
	t->add_option("--config", train.config, "JSON run configuration");
	t->add_option("--data", train.data, "Load CSV (series_id,timestamp,value)");
	t->add_option("--out", train.out, "Checkpoint directory");
	t->add_option("--seeds", train.seeds, "Comma-separated member seeds");
	t->add_option("--to", train.to, "Train on hours before this date");
	t->add_option("--ablation", train.ablations, "ab1..ab10, repeatable");
	t->add_flag("--desk-scale", train.desk_scale, "Desk-scale default schedule");

	RangeOptions fc;
	auto *f = app.add_subcommand("forecast", "Rolling next-day forecasts from saved checkpoints");
	f->add_option("--checkpoints", fc.checkpoints, "Checkpoint directory")->required();
	f->add_option("--data", fc.data, "Load CSV")->required();
	f->add_option("--from", fc.from, "First forecasted day, YYYY-MM-DD")->required();
	f->add_option("--to", fc.to, "Last forecasted day (default: --from)");
	f->add_option("--out", fc.out, "Forecast CSV");

	EvaluateOptions ev;
	auto *e = app.add_subcommand("evaluate", "Score a forecast CSV against actual load");
	e->add_option("--forecast", ev.forecast, "Forecast CSV")->required();
	e->add_option("--data", ev.data, "Actual load CSV")->required();
	e->add_option("--out", ev.out, "Report directory");
	e->add_flag("--no-intervals", ev.no_intervals, "Ignore the lower/upper columns");

	std::string diag_data;
	std::string diag_out = "diagnostics.csv";
	auto *d = app.add_subcommand("diagnose", "Variability statistics of each series");
	d->add_option("--data", diag_data, "Load CSV")->required();
	d->add_option("--out", diag_out, "Diagnostics CSV");

	SyntheticSpec synth;
	std::string synth_out = "synthetic.csv";
	std::string synth_start;
	auto *s = app.add_subcommand("synth", "Write a synthetic load data set");
	s->add_option("--out", synth_out, "Output CSV");
	s->add_option("--series", synth.series_count, "Number of series");
	s->add_option("--days", synth.days, "Length in days");
	s->add_option("--noise", synth.noise, "Noise std as a fraction of the level");
	s->add_option("--seed", synth.seed, "Generator seed");
	s->add_option("--start", synth_start, "First day, YYYY-MM-DD");

	RangeOptions nv;
	auto *n = app.add_subcommand("naive", "Same-weekday-last-week benchmark forecasts");
	n->add_option("--data", nv.data, "Load CSV")->required();
	n->add_option("--from", nv.from, "First forecasted day")->required();
	n->add_option("--to", nv.to, "Last forecasted day (default: --from)");
	n->add_option("--out", nv.out, "Forecast CSV");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &err) {
		const int code = app.exit(err);
		return code == 0 ? kOk : kInvalid;
	}

	try {
		if (t->parsed()) {
			return cmd_train(train);
		}
		if (f->parsed()) {
			return cmd_forecast(fc);
		}
		if (e->parsed()) {
			return cmd_evaluate(ev);
		}
		if (d->parsed()) {
			return cmd_diagnose(diag_data, diag_out);
		}
		if (s->parsed()) {
			if (!synth_start.empty()) {
				synth.start = parse_day(synth_start);
			}
			write_csv(fs::path(synth_out), generate_synthetic(synth));
			return kOk;
		}
		if (n->parsed()) {
			return cmd_naive(nv);
		}
	} catch (const NumericError &err) {
		std::cerr << "numeric failure: " << err.what() << '\n';
		return kNumeric;
	} catch (const std::exception &err) {
		std::cerr << "error: " << err.what() << '\n';
		return kInvalid;
	}
	return kInvalid;
}
