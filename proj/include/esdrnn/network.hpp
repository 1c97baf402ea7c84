#pragma once

#include "esdrnn/autodiff.hpp"
#include "esdrnn/drnn_cell.hpp"
#include "esdrnn/random.hpp"
#include "esdrnn/timeseries.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace esdrnn {

inline constexpr int kHorizon = 24;
inline constexpr int kInputWindow = 168;
/// Point (24) + lower bound (24) + upper bound (24) + delta alpha + delta beta.
inline constexpr int kOutputWidth = 3 * kHorizon + 2;

struct NetworkConfig {
	std::vector<std::vector<int>> blocks{{2, 7}, {4}}; // dilations per layer, grouped in blocks
	int s_c = 100;
	int s_h = 40;
	int s_y = 60;
	int embedding_dim = 4;
	CellVariant cell_variant = CellVariant::Full;
	bool use_shortcut = true;
	bool use_embedding = true;
	bool use_es = true;          // false: normalised-only inputs, no seasonal factors anywhere
	bool use_seasonal_input = true;
	bool use_level_input = true;
	bool use_calendar_input = true;

	/// Width of the vector fed to the first layer.
	int rnn_input_width() const;
	int layer_count() const;
	void validate() const;
};

/// Applies ablation `index` (1-10) on top of a config.
void apply_ablation(NetworkConfig &config, int index);

struct Network {
	NetworkConfig config;
	std::vector<DRnnCellParams> cells;
	Eigen::MatrixXd embedding; // embedding_dim x 90, empty when embedding is off
	Eigen::MatrixXd head_w;    // 74 x s_y
	Eigen::MatrixXd head_b;    // 74 x 1
};

Network make_network(const NetworkConfig &config, Rng &rng);

struct NamedParameter {
	std::string name;
	Eigen::MatrixXd *value = nullptr;
};

/// Every trainable matrix, in a fixed order.
std::vector<NamedParameter> collect_parameters(Network &network);
std::size_t parameter_count(const Network &network);

/// Calendar one-hot blocks mapped through the embedding matrix.
ad::Var embed_calendar(const ad::Var &embedding, const ad::Var &one_hot);

struct BoundNetwork {
	const Network *network = nullptr;
	std::vector<BoundCell> cells;
	ad::Var embedding;
	ad::Var head_w;
	ad::Var head_b;
	/// Leaves in collect_parameters() order.
	std::vector<ad::Var> leaves;
};

BoundNetwork bind(ad::Tape &tape, const Network &network);

/// One CellState per layer.
using NetworkState = std::vector<CellState>;
using NetworkStateValues = std::vector<CellStateValues>;

NetworkStateValues zero_state(const Network &network);
NetworkStateValues snapshot(const NetworkState &state);
NetworkState restore(ad::Tape &tape, const NetworkStateValues &values);

/// Components of the extended input pattern for one step.
struct NetworkInput {
	Eigen::VectorXd x_in;           // 168 squashed, deseasonalised, normalised values
	Eigen::VectorXd s_hat_centered; // 24 seasonal factors of the forecast day minus one
	double level_log = 0.0;         // log10 of the input-window mean
	Eigen::VectorXd calendar;       // 90 one-hot entries
};

struct NetworkOutputVars {
	ad::Var raw;         // 74x1
	ad::Var x_hat;       // 24x1
	ad::Var x_lower;     // 24x1
	ad::Var x_upper;     // 24x1
	ad::Var delta;       // 2x1: delta alpha, delta beta
	ad::Var head_input;  // s_y x 1, what the linear head consumed
};

struct NetworkOutput {
	Eigen::VectorXd x_hat;
	Eigen::VectorXd x_lower;
	Eigen::VectorXd x_upper;
	double delta_alpha = 0.0;
	double delta_beta = 0.0;
};

NetworkOutput values_of(const NetworkOutputVars &vars);

/// Assembles the first-layer input according to the config's input toggles.
ad::Var assemble_input(ad::Tape &tape, const BoundNetwork &net, const NetworkInput &input);

/// Runs every layer once and the linear head; `state` is advanced in place.
NetworkOutputVars network_step(const BoundNetwork &net, const NetworkInput &input, NetworkState &state);

} // namespace esdrnn
