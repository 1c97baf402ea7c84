#pragma once

// Dilated recurrent cell fed by both the most recent (t-1) and the delayed
// (t-d) states, plus the reduced variants used for ablations.

#include "esdrnn/autodiff.hpp"
#include "esdrnn/random.hpp"

#include <Eigen/Dense>

#include <deque>
#include <string>
#include <string_view>
#include <vector>

namespace esdrnn {

enum class CellVariant {
	Full,
	NoFusion,   // no fusion gate; delayed c-state if available, otherwise recent
	NoDilation, // every t-d reference replaced by t-1
	NoRecent,   // every t-1 reference replaced by t-d
	ClassicLstm // textbook LSTM over a c-state of size s_c, y = first s_y of h
};

std::string_view to_string(CellVariant v);
CellVariant parse_cell_variant(std::string_view name);

struct CellShape {
	int input_size = 0;
	int s_c = 0;
	int s_h = 0;
	int s_y = 0;
	int dilation = 1;
	CellVariant variant = CellVariant::Full;

	int gate_count() const {
		return variant == CellVariant::NoFusion ? 3 : 4;
	}
	/// Width of the controlling state fed back into the gates.
	int recurrent_size() const {
		return variant == CellVariant::ClassicLstm ? s_c : s_h;
	}
	bool uses_delayed_input() const {
		return variant != CellVariant::ClassicLstm;
	}
	void validate() const;
};

/// Gate weights stacked by rows in the order f, u, o, c (NoFusion: u, o, c;
/// for ClassicLstm f, u, o, c play forget, input, output and candidate).
struct DRnnCellParams {
	CellShape shape;
	Eigen::MatrixXd W; // (gates * s_c) x input_size
	Eigen::MatrixXd V; // (gates * s_c) x recurrent_size, applied to h(t-1)
	Eigen::MatrixXd U; // (gates * s_c) x recurrent_size, applied to h(t-d); 0 columns for ClassicLstm
	Eigen::MatrixXd b; // (gates * s_c) x 1

	std::size_t parameter_count() const {
		return static_cast<std::size_t>(W.size() + V.size() + U.size() + b.size());
	}
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
DRnnCellParams init_params(const CellShape &shape, Rng &rng);
DRnnCellParams init_params(int input_size, int s_c, int s_h, int s_y, int dilation, Rng &rng,
                           CellVariant variant = CellVariant::Full);

/// Parameters bound as leaves on a tape.
struct BoundCell {
	const DRnnCellParams *params = nullptr;
	ad::Var W, V, U, b;
};

BoundCell bind(ad::Tape &tape, const DRnnCellParams &params);

/// History of (c, h) pairs on a tape, oldest first; back() is t-1, front() the
/// delayed state once `dilation` steps have been taken.
struct CellState {
	std::deque<ad::Var> c;
	std::deque<ad::Var> h;
};

/// Same history as plain vectors, detached from any tape.
struct CellStateValues {
	std::vector<Eigen::VectorXd> c;
	std::vector<Eigen::VectorXd> h;
};

/// Zero c and h.
CellStateValues zero_state(const CellShape &shape);
CellStateValues snapshot(const CellState &state);
CellState restore(ad::Tape &tape, const CellStateValues &values);

struct CellStepResult {
	ad::Var y;
	CellState state;
};

CellStepResult cell_step(const BoundCell &cell, const CellState &state, const ad::Var &x);

} // namespace esdrnn
