#pragma once

// Persistence of one trained ensemble member.
//
// Binary layout, all integers and doubles little-endian:
//   "ESDRNNCK" | u32 version | str config_json | u64 seed | f64 i_alpha | f64 i_beta
//   | u64 n_params | n x (str name | u64 rows | u64 cols | rows*cols f64, column-major)
//   | u64 n_series | n x (str id | f64 level | 168 f64 seasonal | u64 head | f64 alpha | f64 beta
//                         | f64 i_alpha | f64 i_beta)
//   | str rng_state
// where str is a u64 byte count followed by the bytes. A JSON manifest with
// the same stem and a .json extension describes the contents.

#include "esdrnn/es.hpp"
#include "esdrnn/run_config.hpp"
#include "esdrnn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace esdrnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
	std::string config_json; // canonical RunConfig text
	std::uint64_t seed = 0;
	Model model;
	std::vector<std::pair<std::string, es::EsState>> es_states;
	std::string rng_state;

	RunConfig config() const;
};

/// ES state of each series at the end of its data, from a replay with the model.
std::vector<std::pair<std::string, es::EsState>> final_es_states(const Model &model,
                                                                 std::span<const HourlySeries> data, int warmup_weeks);

Checkpoint make_checkpoint(const RunConfig &config, const Trainer &trainer, std::span<const HourlySeries> data);

std::string serialize_checkpoint(const Checkpoint &ckpt);
Checkpoint deserialize_checkpoint(const std::string &bytes, const std::string &source = "<bytes>");

/// Writes `path` and its manifest `path` with extension .json.
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Every *.ckpt file of a directory, sorted by name.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path &dir);

} // namespace esdrnn
