#include "esdrnn/drnn_cell.hpp"

#include <cmath>

namespace esdrnn {

std::string_view to_string(CellVariant v) {
	switch (v) {
	case CellVariant::Full:
		return "full";
	case CellVariant::NoFusion:
		return "no_fusion";
	case CellVariant::NoDilation:
		return "no_dilation";
	case CellVariant::NoRecent:
		return "no_recent";
	case CellVariant::ClassicLstm:
		return "classic_lstm";
	}
	return "full";
}

CellVariant parse_cell_variant(std::string_view name) {
	for (auto v : {CellVariant::Full, CellVariant::NoFusion, CellVariant::NoDilation, CellVariant::NoRecent,
	               CellVariant::ClassicLstm}) {
		if (to_string(v) == name) {
			return v;
		}
	}
	throw ValidationError("unknown cell variant '" + std::string(name) + "'");
}

void CellShape::validate() const {
	if (input_size <= 0 || s_c <= 0 || s_h <= 0 || s_y <= 0) {
		throw ValidationError("cell sizes must be positive");
	}
	if (s_c != s_h + s_y) {
		throw ValidationError("cell size mismatch: s_c = " + std::to_string(s_c) + " but s_h + s_y = " +
		                      std::to_string(s_h + s_y));
	}
	if (dilation < 1) {
		throw ValidationError("dilation must be >= 1");
	}
}

DRnnCellParams init_params(const CellShape &shape, Rng &rng) {
	shape.validate();
	const int rows = shape.gate_count() * shape.s_c;
	const int rec = shape.recurrent_size();
	const int fan_in = shape.input_size + rec * (shape.uses_delayed_input() ? 2 : 1);
	const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
	auto draw = [&](int n_rows, int n_cols) {
		Eigen::MatrixXd m(n_rows, n_cols);
		// column-major fill order is part of the seed contract
		for (Eigen::Index i = 0; i < m.size(); ++i) {
			m.data()[i] = uniform(rng, -r, r);
		}
		return m;
	};
	DRnnCellParams p;
	p.shape = shape;
	p.W = draw(rows, shape.input_size);
	p.V = draw(rows, rec);
	p.U = shape.uses_delayed_input() ? draw(rows, rec) : Eigen::MatrixXd(rows, 0);
	p.b = Eigen::MatrixXd::Zero(rows, 1);
	return p;
}

DRnnCellParams init_params(int input_size, int s_c, int s_h, int s_y, int dilation, Rng &rng,
                           CellVariant variant) {
	return init_params(CellShape{input_size, s_c, s_h, s_y, dilation, variant}, rng);
}

BoundCell bind(ad::Tape &tape, const DRnnCellParams &params) {
	BoundCell b;
	b.params = &params;
	b.W = tape.leaf(params.W);
	b.V = tape.leaf(params.V);
	b.U = tape.leaf(params.U);
	b.b = tape.leaf(params.b);
	return b;
}

CellStateValues zero_state(const CellShape &shape) {
	CellStateValues v;
	v.c.push_back(Eigen::VectorXd::Zero(shape.s_c));
	v.h.push_back(Eigen::VectorXd::Zero(shape.recurrent_size()));
	return v;
}

CellStateValues snapshot(const CellState &state) {
	CellStateValues v;
	for (const auto &c : state.c) {
		v.c.emplace_back(c.value());
	}
	for (const auto &h : state.h) {
		v.h.emplace_back(h.value());
	}
	return v;
}

CellState restore(ad::Tape &tape, const CellStateValues &values) {
	CellState s;
	for (const auto &c : values.c) {
		s.c.push_back(tape.constant(c));
	}
	for (const auto &h : values.h) {
		s.h.push_back(tape.constant(h));
	}
	return s;
}

CellStepResult cell_step(const BoundCell &cell, const CellState &state, const ad::Var &x) {
	using namespace esdrnn::ad;
	const CellShape &shape = cell.params->shape;
	if (x.rows() != shape.input_size || x.cols() != 1) {
		throw ShapeError("cell_step: input must be " + std::to_string(shape.input_size) + "x1, got " +
		                 std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
	}
	if (state.c.empty() || state.h.empty()) {
		throw ValidationError("cell_step: state history is empty");
	}
	const int n = shape.s_c;
	const bool delayed_available = static_cast<int>(state.c.size()) >= shape.dilation;

	Var c_recent = state.c.back();
	Var h_recent = state.h.back();
	Var c_delayed = state.c.front();
	Var h_delayed = state.h.front();
	if (shape.variant == CellVariant::NoDilation) {
		c_delayed = c_recent;
		h_delayed = h_recent;
	} else if (shape.variant == CellVariant::NoRecent) {
		c_recent = c_delayed;
		h_recent = h_delayed;
	}

	Var pre = matmul(cell.W, x) + matmul(cell.V, h_recent);
	if (shape.uses_delayed_input()) {
		pre = pre + matmul(cell.U, h_delayed);
	}
	pre = pre + cell.b;

	Var c;
	Var h_full;
	switch (shape.variant) {
	case CellVariant::NoFusion: {
		Var u = sigmoid(slice_rows(pre, 0, n));
		Var o = sigmoid(slice_rows(pre, n, n));
		Var cand = tanh(slice_rows(pre, 2 * n, n));
		Var past = delayed_available ? c_delayed : c_recent;
		c = hadamard(u, past) + hadamard(one_minus(u), cand);
		h_full = hadamard(o, c);
		break;
	}
	case CellVariant::ClassicLstm: {
		Var f = sigmoid(slice_rows(pre, 0, n));
		Var i = sigmoid(slice_rows(pre, n, n));
		Var o = sigmoid(slice_rows(pre, 2 * n, n));
		Var g = tanh(slice_rows(pre, 3 * n, n));
		c = hadamard(f, c_recent) + hadamard(i, g);
		h_full = hadamard(o, tanh(c));
		break;
	}
	default: {
		Var f = sigmoid(slice_rows(pre, 0, n));
		Var u = sigmoid(slice_rows(pre, n, n));
		Var o = sigmoid(slice_rows(pre, 2 * n, n));
		Var cand = tanh(slice_rows(pre, 3 * n, n));
		Var fused = hadamard(f, c_recent) + hadamard(one_minus(f), c_delayed);
		c = hadamard(u, fused) + hadamard(one_minus(u), cand);
		h_full = hadamard(o, c);
		break;
	}
	}

	CellStepResult out;
	out.y = slice_rows(h_full, 0, shape.s_y);
	out.state = state;
	out.state.c.push_back(c);
	if (shape.variant == CellVariant::ClassicLstm) {
		out.state.h.push_back(h_full);
	} else {
		out.state.h.push_back(slice_rows(h_full, shape.s_y, shape.s_h));
	}
	const std::size_t depth = static_cast<std::size_t>(shape.variant == CellVariant::ClassicLstm ? 1 : shape.dilation);
	while (out.state.c.size() > depth) {
		out.state.c.pop_front();
		out.state.h.pop_front();
	}
	return out;
}

} // namespace esdrnn
