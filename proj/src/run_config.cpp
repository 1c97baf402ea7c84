#include "esdrnn/run_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace esdrnn {

using nlohmann::json;
using nlohmann::ordered_json;

RunConfig RunConfig::defaults(bool desk_scale) {
	RunConfig c;
	c.desk_scale = desk_scale;
	c.schedule = desk_scale ? TrainSchedule::desk() : TrainSchedule::full();
	return c;
}

NetworkConfig RunConfig::effective_network() const {
	NetworkConfig n = network;
	for (int a : ablations) {
		apply_ablation(n, a);
	}
	return n;
}

std::vector<std::uint64_t> RunConfig::effective_seeds() const {
	if (!seeds.empty()) {
		return seeds;
	}
	std::vector<std::uint64_t> s;
	for (int i = 1; i <= schedule.ensemble_size; ++i) {
		s.push_back(static_cast<std::uint64_t>(i));
	}
	return s;
}

void RunConfig::validate() const {
	network.validate();
	effective_network().validate();
	schedule.validate();
	loss.validate();
	std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
	if (unique.size() != seeds.size()) {
		throw ValidationError("config: duplicate seeds");
	}
	if (!std::isfinite(i_alpha) || !std::isfinite(i_beta)) {
		throw ValidationError("config: i_alpha and i_beta must be finite");
	}
}

int parse_ablation(std::string_view name) {
	std::string_view digits = name;
	if (digits.substr(0, 2) == "ab" || digits.substr(0, 2) == "Ab" || digits.substr(0, 2) == "AB") {
		digits.remove_prefix(2);
	}
	int v = 0;
	if (digits.empty() || digits.size() > 2) {
		throw ValidationError("unknown ablation '" + std::string(name) + "' (expected ab1..ab10)");
	}
	for (char ch : digits) {
		if (ch < '0' || ch > '9') {
			throw ValidationError("unknown ablation '" + std::string(name) + "' (expected ab1..ab10)");
		}
		v = v * 10 + (ch - '0');
	}
	if (v < 1 || v > 10) {
		throw ValidationError("unknown ablation '" + std::string(name) + "' (expected ab1..ab10)");
	}
	return v;
}

namespace {

void check_keys(const json &obj, const std::set<std::string> &allowed, const std::string &where) {
	if (!obj.is_object()) {
		throw ValidationError(where + ": expected an object");
	}
	for (const auto &[key, value] : obj.items()) {
		if (!allowed.count(key)) {
			throw ValidationError(where + ": unknown key '" + key + "'");
		}
	}
}

template <typename T>
void read(const json &obj, const char *key, T &out, const std::string &where) {
	auto it = obj.find(key);
	if (it == obj.end()) {
		return;
	}
	try {
		out = it->get<T>();
	} catch (const json::exception &e) {
		throw ValidationError(where + "." + key + ": " + e.what());
	}
}

} // namespace

RunConfig parse_run_config(std::string_view json_text, const std::string &source) {
	json root;
	try {
		root = json::parse(json_text);
	} catch (const json::parse_error &e) {
		throw ValidationError(source + ": " + e.what());
	}
	check_keys(root, {"network", "schedule", "loss", "es", "ablations", "seeds", "data", "train_end", "desk_scale"},
	           source);

	bool desk = false;
	read(root, "desk_scale", desk, source);
	RunConfig c = RunConfig::defaults(desk);

	if (auto it = root.find("network"); it != root.end()) {
		const std::string w = source + ": network";
		check_keys(*it, {"blocks", "s_c", "s_h", "s_y", "embedding_dim", "cell_variant", "use_shortcut", "use_embedding",
		                 "use_es", "use_seasonal_input", "use_level_input", "use_calendar_input"},
		           w);
		NetworkConfig &n = c.network;
		read(*it, "blocks", n.blocks, w);
		read(*it, "s_c", n.s_c, w);
		read(*it, "s_h", n.s_h, w);
		read(*it, "s_y", n.s_y, w);
		read(*it, "embedding_dim", n.embedding_dim, w);
		std::string variant(to_string(n.cell_variant));
		read(*it, "cell_variant", variant, w);
		n.cell_variant = parse_cell_variant(variant);
		read(*it, "use_shortcut", n.use_shortcut, w);
		read(*it, "use_embedding", n.use_embedding, w);
		read(*it, "use_es", n.use_es, w);
		read(*it, "use_seasonal_input", n.use_seasonal_input, w);
		read(*it, "use_level_input", n.use_level_input, w);
		read(*it, "use_calendar_input", n.use_calendar_input, w);
	}
	if (auto it = root.find("schedule"); it != root.end()) {
		const std::string w = source + ": schedule";
		check_keys(*it, {"epochs", "batch_sizes", "learning_rates", "l_o", "w_o", "w_s", "max_updates", "p",
		                 "ensemble_size", "clip_norm"},
		           w);
		TrainSchedule &s = c.schedule;
		read(*it, "epochs", s.epochs, w);
		read(*it, "batch_sizes", s.batch_sizes, w);
		read(*it, "learning_rates", s.learning_rates, w);
		read(*it, "l_o", s.l_o, w);
		read(*it, "w_o", s.w_o, w);
		read(*it, "w_s", s.w_s, w);
		read(*it, "max_updates", s.max_updates, w);
		read(*it, "p", s.p, w);
		read(*it, "ensemble_size", s.ensemble_size, w);
		read(*it, "clip_norm", s.clip_norm, w);
	}
	if (auto it = root.find("loss"); it != root.end()) {
		const std::string w = source + ": loss";
		check_keys(*it, {"q_center", "q_lower", "q_upper", "gamma"}, w);
		read(*it, "q_center", c.loss.q_center, w);
		read(*it, "q_lower", c.loss.q_lower, w);
		read(*it, "q_upper", c.loss.q_upper, w);
		read(*it, "gamma", c.loss.gamma, w);
	}
	if (auto it = root.find("es"); it != root.end()) {
		const std::string w = source + ": es";
		check_keys(*it, {"i_alpha", "i_beta"}, w);
		read(*it, "i_alpha", c.i_alpha, w);
		read(*it, "i_beta", c.i_beta, w);
	}
	if (auto it = root.find("ablations"); it != root.end()) {
		if (!it->is_array()) {
			throw ValidationError(source + ": ablations must be an array");
		}
		for (const auto &a : *it) {
			c.ablations.push_back(a.is_number_integer() ? parse_ablation(std::to_string(a.get<int>()))
			                                            : parse_ablation(a.get<std::string>()));
		}
	}
	read(root, "seeds", c.seeds, source);
	read(root, "data", c.data_path, source);
	if (auto it = root.find("train_end"); it != root.end() && !it->is_null()) {
		try {
			c.train_end = Timestamp::parse(it->get<std::string>());
		} catch (const std::exception &e) {
			throw ValidationError(source + ": train_end: " + e.what());
		}
	}
	c.validate();
	return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
	std::ifstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot open config " + path.string());
	}
	std::stringstream ss;
	ss << f.rdbuf();
	return parse_run_config(ss.str(), path.string());
}

std::string to_json(const RunConfig &c) {
	ordered_json root;
	const NetworkConfig &n = c.network;
	root["network"] = {{"blocks", n.blocks},
	                   {"s_c", n.s_c},
	                   {"s_h", n.s_h},
	                   {"s_y", n.s_y},
	                   {"embedding_dim", n.embedding_dim},
	                   {"cell_variant", std::string(to_string(n.cell_variant))},
	                   {"use_shortcut", n.use_shortcut},
	                   {"use_embedding", n.use_embedding},
	                   {"use_es", n.use_es},
	                   {"use_seasonal_input", n.use_seasonal_input},
	                   {"use_level_input", n.use_level_input},
	                   {"use_calendar_input", n.use_calendar_input}};
	const TrainSchedule &s = c.schedule;
	root["schedule"] = {{"epochs", s.epochs},
	                    {"batch_sizes", s.batch_sizes},
	                    {"learning_rates", s.learning_rates},
	                    {"l_o", s.l_o},
	                    {"w_o", s.w_o},
	                    {"w_s", s.w_s},
	                    {"max_updates", s.max_updates},
	                    {"p", s.p},
	                    {"ensemble_size", s.ensemble_size},
	                    {"clip_norm", s.clip_norm}};
	root["loss"] = {{"q_center", c.loss.q_center},
	                {"q_lower", c.loss.q_lower},
	                {"q_upper", c.loss.q_upper},
	                {"gamma", c.loss.gamma}};
	root["es"] = {{"i_alpha", c.i_alpha}, {"i_beta", c.i_beta}};
	ordered_json abl = ordered_json::array();
	for (int a : c.ablations) {
		abl.push_back("ab" + std::to_string(a));
	}
	root["ablations"] = abl;
	root["seeds"] = c.seeds;
	root["data"] = c.data_path;
	root["train_end"] = c.train_end ? ordered_json(c.train_end->to_string()) : ordered_json(nullptr);
	root["desk_scale"] = c.desk_scale;
	return root.dump(2);
}

} // namespace esdrnn
