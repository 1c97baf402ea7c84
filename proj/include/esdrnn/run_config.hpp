#pragma once

// Run configuration: every hyperparameter of a training/forecasting run,
// loaded from JSON with strict key checking.

#include "esdrnn/loss.hpp"
#include "esdrnn/network.hpp"
#include "esdrnn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace esdrnn {

struct RunConfig {
	NetworkConfig network;
	TrainSchedule schedule;
	LossConfig loss;
	double i_alpha = -3.5;
	double i_beta = 0.3;
	std::vector<int> ablations; // 1..10
	std::vector<std::uint64_t> seeds;
	std::string data_path;
	std::optional<Timestamp> train_end; // training uses hours before this instant
	bool desk_scale = false;

	static RunConfig defaults(bool desk_scale);

	/// Network config with the ablations applied.
	NetworkConfig effective_network() const;
	/// Explicit seeds, or 1..ensemble_size when none are given.
	std::vector<std::uint64_t> effective_seeds() const;
	void validate() const;
};

/// Parses "ab1".."ab10" (or a bare number).
int parse_ablation(std::string_view name);

RunConfig parse_run_config(std::string_view json_text, const std::string &source = "<config>");
RunConfig load_run_config(const std::filesystem::path &path);
/// Canonical JSON text; parse_run_config(to_json(c)) reproduces c.
std::string to_json(const RunConfig &config);

} // namespace esdrnn
