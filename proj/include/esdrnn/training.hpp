#pragma once

// Cross-learning trainer: random batches of series, warm-up then loss steps
// moving one day at a time, one Adam update per batch.

#include "esdrnn/es.hpp"
#include "esdrnn/loss.hpp"
#include "esdrnn/network.hpp"
#include "esdrnn/pipeline.hpp"
#include "esdrnn/random.hpp"
#include "esdrnn/timeseries.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esdrnn {

struct TrainSchedule {
	int epochs = 9;
	std::vector<int> batch_sizes{2, 2, 2, 5, 5, 5, 5, 5, 5};
	std::vector<double> learning_rates{3e-3, 3e-3, 3e-3, 3e-3, 1e-3, 3e-4, 1e-4, 1e-4, 1e-4};
	int l_o = 50;             // loss steps (days) per batch sequence
	int w_o = 3;              // training warm-up, weeks
	int w_s = 13;             // forecasting warm-up, weeks
	int max_updates = 100;    // N, upper bound on updates per epoch
	double p = 0.7;
	int ensemble_size = 5;
	double clip_norm = 20.0;

	static TrainSchedule full();
	/// Shorter sequences and a small ensemble for a single desktop CPU.
	static TrainSchedule desk();

	void validate() const;
	int batch_size(int epoch) const; // epoch is 1-based
	double learning_rate(int epoch) const;
	int warmup_steps() const {
		return 7 * w_o;
	}
};

struct AdamState {
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;
	std::int64_t step = 0;
	std::vector<Eigen::MatrixXd> m;
	std::vector<Eigen::MatrixXd> v;
};

/// Bias-corrected Adam step. Moments are allocated on the first call.
void adam_update(std::span<Eigen::MatrixXd *const> params, std::span<const Eigen::MatrixXd> grads, AdamState &state,
                 double lr);

/// Rescales the gradients so that their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Eigen::MatrixXd> grads, double max_norm);

/// Sub-epochs per epoch: max(1, round((N b / L)^p)).
int sub_epochs(int max_updates, int batch_size, int series_count, double p);

/// min(N, n_o * ceil(L / b)).
int updates_per_epoch(int max_updates, int batch_size, int series_count, double p);

/// Fixed logits around which the smoothing coefficients move.
struct EsInit {
	double i_alpha = -3.5;
	double i_beta = 0.3;
};

struct Model {
	Network network;
	double i_alpha = -3.5;
	double i_beta = 0.3;
};

Model make_model(const NetworkConfig &config, Rng &rng, double i_alpha = -3.5, double i_beta = 0.3);

/// Stepping position of one series: ES and network states after the steps so
/// far. Step k forecasts the day starting at hour origin + 168 + 24 k.
struct SeriesCursor {
	const HourlySeries *series = nullptr;
	std::size_t origin = 0; // first hour of the ES initialisation week
	std::size_t step = 0;
	es::EsState es;
	NetworkStateValues rnn;

	std::size_t input_start() const {
		return origin + 24 * step;
	}
	std::size_t forecast_start() const {
		return input_start() + kInputWindow;
	}
};

SeriesCursor start_cursor(const Model &model, const HourlySeries &series, std::size_t origin);

/// Number of steps whose output day lies inside the series, for a given origin.
std::size_t steps_available(std::size_t series_length, std::size_t origin);

struct StepResult {
	TrainingSample sample;
	NetworkOutput output;
	NetworkStateValues next_rnn;
};

/// Network output for the cursor's current step, without gradients. The
/// cursor is not modified.
StepResult forward_step(const Model &model, const SeriesCursor &cursor);

/// Moves the cursor past a computed step: the network state is committed and
/// the ES state runs through the forecasted day, then takes the new
/// coefficients. The day must lie inside the series.
void commit_step(const Model &model, SeriesCursor &cursor, const StepResult &step);

/// forward_step followed by commit_step.
StepResult advance(const Model &model, SeriesCursor &cursor);

struct EpochReport {
	int epoch = 0;
	int updates = 0;
	double mean_loss = 0.0;
	double learning_rate = 0.0;
	int batch_size = 0;

	std::string to_log_line() const;
};

struct TrainingData {
	std::vector<const HourlySeries *> series;   // usable series
	std::vector<std::string> excluded;          // ids of series too short for one sequence
};

/// Keeps the series long enough for w_o warm-up weeks plus l_o loss days.
TrainingData select_training_series(std::span<const HourlySeries> data, const TrainSchedule &schedule);

/// Loss of one batch sequence set, with gradients w.r.t. every network parameter.
struct BatchResult {
	double loss = 0.0;
	std::vector<Eigen::MatrixXd> grads; // collect_parameters order
	std::size_t loss_steps = 0;
};

/// Runs warm-up and loss steps for each (series, origin) pair and returns the
/// mean loss over all loss steps. Warm-up steps never reach the gradient.
BatchResult batch_gradient(const Model &model, std::span<const HourlySeries *const> series,
                           std::span<const std::size_t> origins, int warmup_steps, int loss_steps,
                           const LossConfig &loss);

struct Trainer {
	std::uint64_t seed = 0;
	Model model;
	AdamState adam;
	Rng rng;
	TrainSchedule schedule;
	LossConfig loss;
};

Trainer make_trainer(const NetworkConfig &config, const TrainSchedule &schedule, const LossConfig &loss,
                     std::uint64_t seed, const EsInit &es_init = {});

EpochReport train_epoch(Trainer &trainer, const TrainingData &data, int epoch);

using EpochLogger = std::function<void(std::uint64_t seed, const EpochReport &)>;

/// Full schedule for one seed.
Trainer train_model(const NetworkConfig &config, const TrainSchedule &schedule, const LossConfig &loss,
                    std::span<const HourlySeries> data, std::uint64_t seed, const EsInit &es_init = {},
                    const EpochLogger &log = {});

/// Independent trainings, one per seed, run on parallel threads.
std::vector<Trainer> train_ensemble(const NetworkConfig &config, const TrainSchedule &schedule,
                                    const LossConfig &loss, std::span<const HourlySeries> data,
                                    std::span<const std::uint64_t> seeds, const EsInit &es_init = {},
                                    const EpochLogger &log = {});

} // namespace esdrnn
