#include "esdrnn/network.hpp"

#include <cmath>
#include <optional>

namespace esdrnn {

int NetworkConfig::rnn_input_width() const {
	int w = kInputWindow;
	if (use_es && use_seasonal_input) {
		w += kHorizon;
	}
	if (use_level_input) {
		w += 1;
	}
	if (use_calendar_input) {
		w += use_embedding ? embedding_dim : CalendarFeatures::kWidth;
	}
	return w;
}

int NetworkConfig::layer_count() const {
	int n = 0;
	for (const auto &b : blocks) {
		n += static_cast<int>(b.size());
	}
	return n;
}

void NetworkConfig::validate() const {
	if (s_c <= 0 || s_h <= 0 || s_y <= 0) {
		throw ValidationError("network: cell sizes must be positive");
	}
	if (s_c != s_h + s_y) {
		throw ValidationError("network: s_c (" + std::to_string(s_c) + ") must equal s_h + s_y (" +
		                      std::to_string(s_h + s_y) + ")");
	}
	if (blocks.empty()) {
		throw ValidationError("network: at least one block is required");
	}
	for (const auto &b : blocks) {
		if (b.empty()) {
			throw ValidationError("network: empty block");
		}
		for (int d : b) {
			if (d < 1) {
				throw ValidationError("network: dilations must be >= 1");
			}
		}
	}
	if (use_embedding && use_calendar_input && embedding_dim <= 0) {
		throw ValidationError("network: embedding_dim must be positive");
	}
}

void apply_ablation(NetworkConfig &config, int index) {
	switch (index) {
	case 1:
		config.use_es = false;
		config.use_seasonal_input = false;
		break;
	case 2:
		config.use_shortcut = false;
		break;
	case 3:
		config.cell_variant = CellVariant::NoFusion;
		break;
	case 4:
		config.cell_variant = CellVariant::NoDilation;
		break;
	case 5:
		config.cell_variant = CellVariant::NoRecent;
		break;
	case 6:
		config.cell_variant = CellVariant::ClassicLstm;
		break;
	case 7:
		config.use_level_input = false;
		break;
	case 8:
		config.use_level_input = false;
		config.use_calendar_input = false;
		break;
	case 9:
		config.use_level_input = false;
		config.use_calendar_input = false;
		config.use_seasonal_input = false;
		break;
	case 10:
		config.use_embedding = false;
		break;
	default:
		throw ValidationError("unknown ablation ab" + std::to_string(index) + " (expected ab1..ab10)");
	}
}

Network make_network(const NetworkConfig &config, Rng &rng) {
	config.validate();
	Network net;
	net.config = config;
	int input = config.rnn_input_width();
	for (const auto &block : config.blocks) {
		for (int d : block) {
			net.cells.push_back(
			    init_params(CellShape{input, config.s_c, config.s_h, config.s_y, d, config.cell_variant}, rng));
			input = config.s_y;
		}
	}
	if (config.use_embedding && config.use_calendar_input) {
		const double r = 1.0 / std::sqrt(static_cast<double>(CalendarFeatures::kWidth));
		net.embedding.resize(config.embedding_dim, CalendarFeatures::kWidth);
		for (Eigen::Index i = 0; i < net.embedding.size(); ++i) {
			net.embedding.data()[i] = uniform(rng, -r, r);
		}
	}
	const double r = 1.0 / std::sqrt(static_cast<double>(config.s_y));
	net.head_w.resize(kOutputWidth, config.s_y);
	for (Eigen::Index i = 0; i < net.head_w.size(); ++i) {
		net.head_w.data()[i] = uniform(rng, -r, r);
	}
	net.head_b = Eigen::MatrixXd::Zero(kOutputWidth, 1);
	return net;
}

std::vector<NamedParameter> collect_parameters(Network &network) {
	std::vector<NamedParameter> out;
	for (std::size_t i = 0; i < network.cells.size(); ++i) {
		auto &c = network.cells[i];
		const std::string prefix = "layer" + std::to_string(i) + ".";
		out.push_back({prefix + "W", &c.W});
		out.push_back({prefix + "V", &c.V});
		out.push_back({prefix + "U", &c.U});
		out.push_back({prefix + "b", &c.b});
	}
	if (network.embedding.size() > 0) {
		out.push_back({"embedding", &network.embedding});
	}
	out.push_back({"head.W", &network.head_w});
	out.push_back({"head.b", &network.head_b});
	return out;
}

std::size_t parameter_count(const Network &network) {
	std::size_t n = 0;
	for (const auto &c : network.cells) {
		n += c.parameter_count();
	}
	n += static_cast<std::size_t>(network.embedding.size() + network.head_w.size() + network.head_b.size());
	return n;
}

ad::Var embed_calendar(const ad::Var &embedding, const ad::Var &one_hot) {
	const auto &v = one_hot.value();
	if (v.rows() != CalendarFeatures::kWidth || v.cols() != 1) {
		throw ShapeError("embed_calendar: expected a 90x1 one-hot vector");
	}
	auto block_ok = [&](int begin, int len) {
		int ones = 0;
		for (int i = begin; i < begin + len; ++i) {
			if (v(i, 0) == 1.0) {
				++ones;
			} else if (v(i, 0) != 0.0) {
				return false;
			}
		}
		return ones == 1;
	};
	if (!block_ok(0, CalendarFeatures::kWeekDays) ||
	    !block_ok(CalendarFeatures::kWeekDays, CalendarFeatures::kMonthDays) ||
	    !block_ok(CalendarFeatures::kWeekDays + CalendarFeatures::kMonthDays, CalendarFeatures::kYearWeeks)) {
		throw ValidationError("embed_calendar: calendar blocks must each be one-hot");
	}
	return ad::matmul(embedding, one_hot);
}

BoundNetwork bind(ad::Tape &tape, const Network &network) {
	BoundNetwork b;
	b.network = &network;
	for (const auto &c : network.cells) {
		b.cells.push_back(bind(tape, c));
		const auto &bc = b.cells.back();
		b.leaves.insert(b.leaves.end(), {bc.W, bc.V, bc.U, bc.b});
	}
	if (network.embedding.size() > 0) {
		b.embedding = tape.leaf(network.embedding);
		b.leaves.push_back(b.embedding);
	}
	b.head_w = tape.leaf(network.head_w);
	b.head_b = tape.leaf(network.head_b);
	b.leaves.push_back(b.head_w);
	b.leaves.push_back(b.head_b);
	return b;
}

NetworkStateValues zero_state(const Network &network) {
	NetworkStateValues v;
	for (const auto &c : network.cells) {
		v.push_back(zero_state(c.shape));
	}
	return v;
}

NetworkStateValues snapshot(const NetworkState &state) {
	NetworkStateValues v;
	for (const auto &s : state) {
		v.push_back(snapshot(s));
	}
	return v;
}

NetworkState restore(ad::Tape &tape, const NetworkStateValues &values) {
	NetworkState s;
	for (const auto &v : values) {
		s.push_back(restore(tape, v));
	}
	return s;
}

NetworkOutput values_of(const NetworkOutputVars &vars) {
	NetworkOutput o;
	o.x_hat = vars.x_hat.value();
	o.x_lower = vars.x_lower.value();
	o.x_upper = vars.x_upper.value();
	o.delta_alpha = vars.delta.value()(0, 0);
	o.delta_beta = vars.delta.value()(1, 0);
	return o;
}

ad::Var assemble_input(ad::Tape &tape, const BoundNetwork &net, const NetworkInput &input) {
	const NetworkConfig &cfg = net.network->config;
	if (input.x_in.size() != kInputWindow) {
		throw ShapeError("network input: x_in must have 168 entries, got " + std::to_string(input.x_in.size()));
	}
	std::vector<ad::Var> parts;
	parts.push_back(tape.constant(input.x_in));
	if (cfg.use_es && cfg.use_seasonal_input) {
		if (input.s_hat_centered.size() != kHorizon) {
			throw ShapeError("network input: seasonal vector must have 24 entries");
		}
		parts.push_back(tape.constant(input.s_hat_centered));
	}
	if (cfg.use_level_input) {
		parts.push_back(tape.constant(input.level_log));
	}
	if (cfg.use_calendar_input) {
		if (input.calendar.size() != CalendarFeatures::kWidth) {
			throw ShapeError("network input: calendar vector must have 90 entries");
		}
		ad::Var one_hot = tape.constant(input.calendar);
		parts.push_back(cfg.use_embedding ? embed_calendar(net.embedding, one_hot) : one_hot);
	}
	return ad::concat_rows(std::span<const ad::Var>(parts));
}

NetworkOutputVars network_step(const BoundNetwork &net, const NetworkInput &input, NetworkState &state) {
	const NetworkConfig &cfg = net.network->config;
	ad::Tape &tape = *net.head_w.tape;
	if (state.size() != net.cells.size()) {
		throw ShapeError("network_step: expected one state per layer");
	}

	ad::Var x = assemble_input(tape, net, input);
	std::size_t layer = 0;
	std::optional<ad::Var> previous_block_out;
	for (const auto &block : cfg.blocks) {
		ad::Var block_in = x;
		for (std::size_t k = 0; k < block.size(); ++k, ++layer) {
			CellStepResult r = cell_step(net.cells[layer], state[layer], x);
			state[layer] = std::move(r.state);
			x = r.y;
		}
		if (cfg.use_shortcut && previous_block_out) {
			x = x + block_in;
		}
		previous_block_out = x;
	}

	NetworkOutputVars out;
	out.head_input = x;
	out.raw = ad::matmul(net.head_w, x) + net.head_b;
	out.x_hat = ad::slice_rows(out.raw, 0, kHorizon);
	out.x_lower = ad::slice_rows(out.raw, kHorizon, kHorizon);
	out.x_upper = ad::slice_rows(out.raw, 2 * kHorizon, kHorizon);
	out.delta = ad::slice_rows(out.raw, 3 * kHorizon, 2);
	return out;
}

} // namespace esdrnn
