#include "esdrnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace esdrnn {

TrainSchedule TrainSchedule::full() {
	return TrainSchedule{};
}

TrainSchedule TrainSchedule::desk() {
	TrainSchedule s;
	s.l_o = 20;
	s.ensemble_size = 5;
	return s;
}

void TrainSchedule::validate() const {
	if (epochs < 1) {
		throw ValidationError("schedule: epochs must be >= 1");
	}
	if (static_cast<int>(batch_sizes.size()) != epochs || static_cast<int>(learning_rates.size()) != epochs) {
		throw ValidationError("schedule: batch_sizes and learning_rates need one entry per epoch (" +
		                      std::to_string(epochs) + ")");
	}
	for (int b : batch_sizes) {
		if (b < 1) {
			throw ValidationError("schedule: batch sizes must be >= 1");
		}
	}
	for (double lr : learning_rates) {
		if (!(lr > 0.0) || !std::isfinite(lr)) {
			throw ValidationError("schedule: learning rates must be positive");
		}
	}
	if (l_o < 1 || w_o < 1 || w_s < 2 || max_updates < 1 || ensemble_size < 1) {
		throw ValidationError("schedule: l_o, w_o, max_updates and ensemble_size must be >= 1, w_s >= 2");
	}
	if (!(p >= 0.0 && p <= 1.0)) {
		throw ValidationError("schedule: p must lie in [0, 1]");
	}
	if (!(clip_norm > 0.0)) {
		throw ValidationError("schedule: clip_norm must be positive");
	}
}

int TrainSchedule::batch_size(int epoch) const {
	return batch_sizes.at(static_cast<std::size_t>(epoch - 1));
}

double TrainSchedule::learning_rate(int epoch) const {
	return learning_rates.at(static_cast<std::size_t>(epoch - 1));
}

void adam_update(std::span<Eigen::MatrixXd *const> params, std::span<const Eigen::MatrixXd> grads, AdamState &state,
                 double lr) {
	if (params.size() != grads.size()) {
		throw ShapeError("adam_update: " + std::to_string(params.size()) + " parameters but " +
		                 std::to_string(grads.size()) + " gradients");
	}
	if (state.m.empty()) {
		for (const auto *p : params) {
			state.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
			state.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
		}
	}
	if (state.m.size() != params.size()) {
		throw ShapeError("adam_update: optimizer state holds a different parameter count");
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols() ||
		    state.m[i].rows() != params[i]->rows() || state.m[i].cols() != params[i]->cols()) {
			throw ShapeError("adam_update: shape mismatch at parameter " + std::to_string(i));
		}
	}
	++state.step;
	const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
	const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
	for (std::size_t i = 0; i < params.size(); ++i) {
		state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
		state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseAbs2();
		params[i]->array() -= lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + state.eps);
	}
}

double clip_global_norm(std::span<Eigen::MatrixXd> grads, double max_norm) {
	double sq = 0.0;
	for (const auto &g : grads) {
		sq += g.squaredNorm();
	}
	const double norm = std::sqrt(sq);
	if (!std::isfinite(norm)) {
		throw NumericError("gradient norm is not finite");
	}
	if (norm > max_norm) {
		const double scale = max_norm / norm;
		for (auto &g : grads) {
			g *= scale;
		}
	}
	return norm;
}

int sub_epochs(int max_updates, int batch_size, int series_count, double p) {
	if (max_updates < 1 || batch_size < 1 || series_count < 1) {
		throw ValidationError("sub_epochs: arguments must be positive");
	}
	const double ratio = static_cast<double>(max_updates) * batch_size / series_count;
	return std::max(1, static_cast<int>(std::lround(std::pow(ratio, p))));
}

int updates_per_epoch(int max_updates, int batch_size, int series_count, double p) {
	const int per_scan = (series_count + batch_size - 1) / batch_size;
	return std::min(max_updates, sub_epochs(max_updates, batch_size, series_count, p) * per_scan);
}

Model make_model(const NetworkConfig &config, Rng &rng, double i_alpha, double i_beta) {
	Model m;
	m.network = make_network(config, rng);
	m.i_alpha = i_alpha;
	m.i_beta = i_beta;
	return m;
}

SeriesCursor start_cursor(const Model &model, const HourlySeries &series, std::size_t origin) {
	if (origin + kInputWindow + kHorizon > series.size()) {
		throw ValidationError("series '" + series.id + "' has no complete step from hour " + std::to_string(origin));
	}
	SeriesCursor c;
	c.series = &series;
	c.origin = origin;
	c.es = es::init_state(std::span<const double>(series.values).subspan(origin, es::kSeasonLength), model.i_alpha,
	                      model.i_beta);
	c.rnn = zero_state(model.network);
	return c;
}

std::size_t steps_available(std::size_t series_length, std::size_t origin) {
	const std::size_t need = origin + kInputWindow + kHorizon;
	return series_length < need ? 0 : (series_length - need) / kHorizon + 1;
}

StepResult forward_step(const Model &model, const SeriesCursor &cursor) {
	const bool use_es = model.network.config.use_es;
	ad::Tape tape;
	BoundNetwork bound = bind(tape, model.network);
	NetworkState state = restore(tape, cursor.rnn);
	StepResult r;
	r.sample = make_sample(*cursor.series, cursor.es, cursor.input_start(), use_es);
	r.output = values_of(network_step(bound, r.sample.network_input(), state));
	r.next_rnn = snapshot(state);
	return r;
}

void commit_step(const Model &model, SeriesCursor &cursor, const StepResult &step) {
	if (model.network.config.use_es) {
		cursor.es = advance_day(*cursor.series, cursor.es, cursor.forecast_start(), step.output.delta_alpha,
		                        step.output.delta_beta);
	} else if (cursor.forecast_start() + kHorizon > cursor.series->size()) {
		throw ValidationError("commit_step: forecasted day lies beyond series '" + cursor.series->id + "'");
	}
	cursor.rnn = step.next_rnn;
	++cursor.step;
}

StepResult advance(const Model &model, SeriesCursor &cursor) {
	StepResult r = forward_step(model, cursor);
	commit_step(model, cursor, r);
	return r;
}

std::string EpochReport::to_log_line() const {
	std::ostringstream os;
	os << "epoch=" << epoch << " updates=" << updates << " loss=" << format_double(mean_loss)
	   << " lr=" << format_double(learning_rate) << " batch=" << batch_size;
	return os.str();
}

namespace {

int sequence_steps(const TrainSchedule &schedule) {
	return schedule.warmup_steps() + schedule.l_o;
}

std::size_t max_origin_day(std::size_t length, int steps) {
	const std::size_t need = kInputWindow + kHorizon * static_cast<std::size_t>(steps);
	return (length - need) / kHorizon;
}

// Day pass of one loss step: the tangents of the seasonal factors it wrote,
// the coefficients it ran with, and the tape variable those came from.
struct TrackedPass {
	DayTangents tangents;
	Eigen::Vector2d coefficients;
	std::optional<ad::Var> coefficient_var;
};

} // namespace

TrainingData select_training_series(std::span<const HourlySeries> data, const TrainSchedule &schedule) {
	TrainingData out;
	const std::size_t need = kInputWindow + kHorizon * static_cast<std::size_t>(sequence_steps(schedule));
	for (const auto &s : data) {
		if (s.size() >= need) {
			out.series.push_back(&s);
		} else {
			out.excluded.push_back(s.id);
		}
	}
	return out;
}

BatchResult batch_gradient(const Model &model, std::span<const HourlySeries *const> series,
                           std::span<const std::size_t> origins, int warmup_steps, int loss_steps,
                           const LossConfig &loss) {
	if (series.size() != origins.size() || series.empty()) {
		throw ValidationError("batch_gradient: need one origin per series");
	}
	if (loss_steps < 1 || warmup_steps < 0) {
		throw ValidationError("batch_gradient: need at least one loss step");
	}
	const bool use_es = model.network.config.use_es;
	ad::Tape tape;
	const BoundNetwork bound = bind(tape, model.network);
	const ad::Var logits = tape.constant(Eigen::MatrixXd(Eigen::Vector2d(model.i_alpha, model.i_beta)));

	std::vector<ad::Var> step_losses;
	for (std::size_t i = 0; i < series.size(); ++i) {
		const HourlySeries &s = *series[i];
		SeriesCursor cur = start_cursor(model, s, origins[i]);
		if (steps_available(s.size(), origins[i]) < static_cast<std::size_t>(warmup_steps + loss_steps)) {
			throw ValidationError("batch_gradient: series '" + s.id + "' too short for the sequence");
		}
		for (int w = 0; w < warmup_steps; ++w) {
			advance(model, cur);
		}

		NetworkState state = restore(tape, cur.rnn);
		std::map<std::size_t, TrackedPass> passes;
		std::optional<ad::Var> pending;
		for (int k = 0; k < loss_steps; ++k) {
			const TrainingSample sample = make_sample(s, cur.es, cur.input_start(), use_es);
			const NetworkOutputVars out = network_step(bound, sample.network_input(), state);

			// The output hours' factors were written by the day pass one week back.
			ad::Var s_hat = tape.constant(sample.s_hat_out_raw);
			if (cur.step >= 7) {
				auto it = passes.find(cur.step - 7);
				if (it != passes.end() && it->second.coefficient_var) {
					const TrackedPass &p = it->second;
					const Eigen::VectorXd base = sample.s_hat_out_raw - p.tangents * p.coefficients;
					s_hat = tape.constant(base) +
					        ad::matmul(tape.constant(Eigen::MatrixXd(p.tangents)), *p.coefficient_var);
				}
			}
			step_losses.push_back(step_loss(out, s_hat, sample.z_out_normalized, loss));

			if (use_es) {
				TrackedPass pass;
				pass.coefficients = Eigen::Vector2d(cur.es.alpha, cur.es.beta);
				pass.coefficient_var = pending;
				pass.tangents = advance_day_tracked(s, cur.es, cur.forecast_start());
				passes.emplace(cur.step, std::move(pass));
				const Eigen::MatrixXd &delta = out.delta.value();
				cur.es = es::update_coefficients(cur.es, delta(0, 0), delta(1, 0));
				pending = ad::sigmoid(logits + out.delta);
			}
			++cur.step;
		}
	}

	const ad::Var total = ad::sum(ad::concat_rows(std::span<const ad::Var>(step_losses)));
	const ad::Var batch_loss = ad::scalar_mul(total, 1.0 / static_cast<double>(step_losses.size()));
	tape.backward(batch_loss);

	BatchResult r;
	r.loss = batch_loss.scalar();
	r.loss_steps = step_losses.size();
	for (const auto &leaf : bound.leaves) {
		r.grads.push_back(tape.gradient(leaf));
	}
	return r;
}

Trainer make_trainer(const NetworkConfig &config, const TrainSchedule &schedule, const LossConfig &loss,
                     std::uint64_t seed, const EsInit &es_init) {
	config.validate();
	schedule.validate();
	loss.validate();
	Trainer t;
	t.seed = seed;
	t.rng.seed(seed);
	t.model = make_model(config, t.rng, es_init.i_alpha, es_init.i_beta);
	t.schedule = schedule;
	t.loss = loss;
	return t;
}

EpochReport train_epoch(Trainer &trainer, const TrainingData &data, int epoch) {
	if (data.series.empty()) {
		throw ValidationError("train_epoch: no series long enough for training");
	}
	const TrainSchedule &sch = trainer.schedule;
	const int b = sch.batch_size(epoch);
	const double lr = sch.learning_rate(epoch);
	const int L = static_cast<int>(data.series.size());
	const int steps = sequence_steps(sch);

	EpochReport report;
	report.epoch = epoch;
	report.batch_size = b;
	report.learning_rate = lr;
	report.updates = updates_per_epoch(sch.max_updates, b, L, sch.p);

	// Series are dealt from a reshuffled deck so every sub-epoch scans all of them.
	std::vector<std::size_t> deck;
	std::size_t next = 0;
	auto draw_series = [&]() {
		if (next == deck.size()) {
			deck.resize(data.series.size());
			std::iota(deck.begin(), deck.end(), std::size_t{0});
			for (std::size_t i = deck.size(); i > 1; --i) {
				std::swap(deck[i - 1], deck[uniform_index(trainer.rng, i)]);
			}
			next = 0;
		}
		return deck[next++];
	};

	std::vector<Eigen::MatrixXd *> params;
	for (auto &p : collect_parameters(trainer.model.network)) {
		params.push_back(p.value);
	}

	double loss_sum = 0.0;
	for (int u = 0; u < report.updates; ++u) {
		std::vector<const HourlySeries *> batch;
		std::vector<std::size_t> origins;
		for (int k = 0; k < b; ++k) {
			const HourlySeries *s = data.series[draw_series()];
			const std::size_t days = max_origin_day(s->size(), steps) + 1;
			batch.push_back(s);
			origins.push_back(kHorizon * uniform_index(trainer.rng, days));
		}
		BatchResult r = batch_gradient(trainer.model, batch, origins, sch.warmup_steps(), sch.l_o, trainer.loss);
		clip_global_norm(r.grads, sch.clip_norm);
		adam_update(params, r.grads, trainer.adam, lr);
		loss_sum += r.loss;
	}
	report.mean_loss = loss_sum / report.updates;
	return report;
}

Trainer train_model(const NetworkConfig &config, const TrainSchedule &schedule, const LossConfig &loss,
                    std::span<const HourlySeries> data, std::uint64_t seed, const EsInit &es_init,
                    const EpochLogger &log) {
	Trainer t = make_trainer(config, schedule, loss, seed, es_init);
	const TrainingData selected = select_training_series(data, schedule);
	for (int e = 1; e <= schedule.epochs; ++e) {
		const EpochReport r = train_epoch(t, selected, e);
		if (log) {
			log(seed, r);
		}
	}
	return t;
}

std::vector<Trainer> train_ensemble(const NetworkConfig &config, const TrainSchedule &schedule,
                                    const LossConfig &loss, std::span<const HourlySeries> data,
                                    std::span<const std::uint64_t> seeds, const EsInit &es_init,
                                    const EpochLogger &log) {
	if (seeds.empty()) {
		throw ValidationError("train_ensemble: at least one seed is required");
	}
	std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
	if (unique.size() != seeds.size()) {
		throw ValidationError("train_ensemble: duplicate seeds");
	}
	config.validate();
	schedule.validate();
	loss.validate();

	std::vector<std::optional<Trainer>> members(seeds.size());
	std::vector<std::exception_ptr> errors(seeds.size());
	std::mutex log_mutex;
	EpochLogger guarded;
	if (log) {
		guarded = [&](std::uint64_t seed, const EpochReport &r) {
			std::lock_guard lock(log_mutex);
			log(seed, r);
		};
	}
	auto run = [&](std::size_t i) {
		try {
			members[i] = train_model(config, schedule, loss, data, seeds[i], es_init, guarded);
		} catch (...) {
			errors[i] = std::current_exception();
		}
	};

	const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
	for (std::size_t begin = 0; begin < seeds.size(); begin += width) {
		const std::size_t end = std::min(seeds.size(), begin + width);
		if (end - begin == 1) {
			run(begin);
			continue;
		}
		std::vector<std::thread> pool;
		for (std::size_t i = begin; i < end; ++i) {
			pool.emplace_back(run, i);
		}
		for (auto &th : pool) {
			th.join();
		}
	}
	for (const auto &e : errors) {
		if (e) {
			std::rethrow_exception(e);
		}
	}
	std::vector<Trainer> out;
	for (auto &m : members) {
		out.push_back(std::move(*m));
	}
	return out;
}

} // namespace esdrnn
