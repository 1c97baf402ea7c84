#include "esdrnn/drnn_cell.hpp"

#include <doctest.h>

#include <array>
#include <tuple>

using namespace esdrnn;
using namespace esdrnn::ad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DRnnCellParams zero_params(int input, int s_h, int s_y, int dilation, CellVariant v = CellVariant::Full) {
	Rng rng(0);
	DRnnCellParams p = init_params(input, s_h + s_y, s_h, s_y, dilation, rng, v);
	p.W.setZero();
	p.V.setZero();
	p.U.setZero();
	p.b.setZero();
	return p;
}

// Gate rows: f, u, o, c for the full cell.
auto gate_rows(DRnnCellParams &p, int gate) {
	return p.b.middleRows(gate * p.shape.s_c, p.shape.s_c);
}

std::vector<VectorXd> run(const DRnnCellParams &p, const std::vector<VectorXd> &inputs,
                          std::vector<VectorXd> *c_trace = nullptr) {
	Tape t;
	BoundCell cell = bind(t, p);
	CellState state = restore(t, zero_state(p.shape));
	std::vector<VectorXd> ys;
	for (const auto &x : inputs) {
		auto r = cell_step(cell, state, t.constant(x));
		state = r.state;
		ys.emplace_back(r.y.value());
		if (c_trace) {
			c_trace->emplace_back(state.c.back().value());
		}
	}
	return ys;
}

std::vector<VectorXd> impulse(int input, int steps, int at) {
	std::vector<VectorXd> xs(steps, VectorXd::Zero(input));
	xs[at](0) = 1.0;
	return xs;
}

double sig(double v) {
	return 1.0 / (1.0 + std::exp(-v));
}

// Direct LSTM: gates from [x; h], c = f*c + i*g, h = o*tanh(c).
struct ReferenceLstm {
	MatrixXd Wf, Wi, Wo, Wg, Vf, Vi, Vo, Vg;
	VectorXd bf, bi, bo, bg;
	VectorXd c, h;

	void step(const VectorXd &x) {
		auto act = [&](const MatrixXd &W, const MatrixXd &V, const VectorXd &b) {
			return VectorXd(W * x + V * h + b);
		};
		const VectorXd f = act(Wf, Vf, bf).unaryExpr([](double v) { return sig(v); });
		const VectorXd i = act(Wi, Vi, bi).unaryExpr([](double v) { return sig(v); });
		const VectorXd o = act(Wo, Vo, bo).unaryExpr([](double v) { return sig(v); });
		const VectorXd g = act(Wg, Vg, bg).array().tanh();
		c = f.cwiseProduct(c) + i.cwiseProduct(g);
		h = o.cwiseProduct(c.array().tanh().matrix());
	}
};

} // namespace

TEST_CASE("zero weights with unit history") {
	DRnnCellParams p = zero_params(3, 2, 3, 2);
	Tape t;
	BoundCell cell = bind(t, p);
	CellState state;
	for (int k = 0; k < 2; ++k) {
		state.c.push_back(t.constant(VectorXd::Ones(5)));
		state.h.push_back(t.constant(VectorXd::Zero(2)));
	}
	auto r = cell_step(cell, state, t.constant(VectorXd::Constant(3, 0.7)));
	const VectorXd c = r.state.c.back().value();
	CHECK(c.isApprox(VectorXd::Constant(5, 0.5), 1e-15));
	CHECK(r.y.value().isApprox(VectorXd::Constant(3, 0.25), 1e-15));
	CHECK(r.state.h.back().value().isApprox(VectorXd::Constant(2, 0.25), 1e-15));
	CHECK(r.state.c.size() == 2);
}

TEST_CASE("update gate limits") {
	Rng rng(4);
	DRnnCellParams p = init_params(3, 5, 2, 3, 2, rng);
	const int n = 5;
	auto c_after = [&](double u_bias, const std::array<VectorXd, 2> &history, const VectorXd &x) {
		DRnnCellParams q = p;
		q.W.middleRows(n, n).setZero();
		q.V.middleRows(n, n).setZero();
		q.U.middleRows(n, n).setZero();
		q.b.middleRows(n, n).setConstant(u_bias);
		Tape t;
		BoundCell cell = bind(t, q);
		CellState state;
		for (const auto &c : history) {
			state.c.push_back(t.constant(c));
			state.h.push_back(t.constant(VectorXd::Constant(2, 0.1)));
		}
		auto r = cell_step(cell, state, t.constant(x));
		// recompute f and the candidate from the same pre-activations
		const VectorXd pre = q.W * x + q.V * VectorXd::Constant(2, 0.1) + q.U * VectorXd::Constant(2, 0.1) + q.b;
		const VectorXd f = pre.head(n).unaryExpr([](double v) { return sig(v); });
		const VectorXd cand = pre.segment(3 * n, n).array().tanh();
		return std::tuple{VectorXd(r.state.c.back().value()), f, cand};
	};
	const std::array<VectorXd, 2> hist{VectorXd::LinSpaced(5, -1, 1), VectorXd::LinSpaced(5, 2, 0.5)};
	const VectorXd x = VectorXd::LinSpaced(3, 0.3, -0.8);

	auto [c1, f1, cand1] = c_after(60.0, hist, x);
	// history is oldest first: hist[0] is t-d, hist[1] is t-1
	const VectorXd fused = f1.cwiseProduct(hist[1]) + (VectorXd::Ones(5) - f1).cwiseProduct(hist[0]);
	CHECK((c1 - fused).cwiseAbs().maxCoeff() < 1e-12);

	auto [c0, f0, cand0] = c_after(-60.0, hist, x);
	CHECK((c0 - cand0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gate and candidate ranges") {
	Rng rng(12);
	DRnnCellParams p = init_params(4, 6, 2, 4, 3, rng);
	p.b.setRandom();
	std::vector<VectorXd> xs;
	for (int i = 0; i < 20; ++i) {
		xs.push_back(VectorXd::Random(4) * 3.0);
	}
	std::vector<VectorXd> cs;
	const auto ys = run(p, xs, &cs);
	// |c| stays below 1 from a zero start since it is a convex mix of values in (-1, 1)
	for (const auto &c : cs) {
		CHECK(c.cwiseAbs().maxCoeff() < 1.0);
	}
	for (const auto &y : ys) {
		CHECK(y.size() == 4);
		CHECK(y.cwiseAbs().maxCoeff() < 1.0);
	}
}

TEST_CASE("dilated memory repeats every d steps") {
	const int d = 3;
	DRnnCellParams p = zero_params(1, 1, 2, d);
	const int n = p.shape.s_c;
	// u saturates to 0 when the impulse is present and to 1 otherwise; f to 0
	gate_rows(p, 0).setConstant(-60.0);
	gate_rows(p, 1).setConstant(60.0);
	p.W.middleRows(n, n).setConstant(-120.0);
	p.W.middleRows(3 * n, n).setConstant(2.0);
	std::vector<VectorXd> cs;
	run(p, impulse(1, 12, 2), &cs);
	for (int t = 0; t < 12; ++t) {
		CAPTURE(t);
		const bool expect = t >= 2 && (t - 2) % d == 0;
		if (expect) {
			CHECK(cs[t](0) == doctest::Approx(std::tanh(2.0)).epsilon(1e-12));
		} else {
			CHECK(std::abs(cs[t](0)) < 1e-20);
		}
	}
}

TEST_CASE("impulse reaches the output through the recurrent paths") {
	const int d = 4;
	const int at = 1;
	// memoryless c (u = 0) so any response after the impulse comes from h feedback
	auto first_response = [&](bool zero_v, bool zero_u) {
		Rng rng(21);
		DRnnCellParams p = init_params(1, 5, 2, 3, d, rng);
		const int n = p.shape.s_c;
		p.b.setZero();
		gate_rows(p, 1).setConstant(-60.0);
		p.W.middleRows(n, n).setZero();
		p.V.middleRows(n, n).setZero();
		p.U.middleRows(n, n).setZero();
		p.W *= 3.0;
		if (zero_v) {
			p.V.setZero();
		}
		if (zero_u) {
			p.U.setZero();
		}
		const auto ys = run(p, impulse(1, 12, at));
		for (int t = at + 1; t < 12; ++t) {
			if (ys[t].cwiseAbs().maxCoeff() > 1e-12) {
				return t;
			}
		}
		return -1;
	};
	CHECK(first_response(true, false) == at + d);
	CHECK(first_response(false, true) == at + 1);
	CHECK(first_response(true, true) == -1);
}

TEST_CASE("classic LSTM variant matches a direct implementation") {
	Rng rng(31);
	const int input = 5;
	const int s_h = 3;
	const int s_y = 4;
	const int n = s_h + s_y;
	DRnnCellParams p = init_params(input, n, s_h, s_y, 1, rng, CellVariant::ClassicLstm);
	p.b = MatrixXd::Random(4 * n, 1) * 0.5;
	REQUIRE(p.U.cols() == 0);
	REQUIRE(p.V.cols() == n);

	ReferenceLstm ref;
	auto rows = [&](const MatrixXd &m, int g) { return MatrixXd(m.middleRows(g * n, n)); };
	ref.Wf = rows(p.W, 0), ref.Wi = rows(p.W, 1), ref.Wo = rows(p.W, 2), ref.Wg = rows(p.W, 3);
	ref.Vf = rows(p.V, 0), ref.Vi = rows(p.V, 1), ref.Vo = rows(p.V, 2), ref.Vg = rows(p.V, 3);
	ref.bf = rows(p.b, 0), ref.bi = rows(p.b, 1), ref.bo = rows(p.b, 2), ref.bg = rows(p.b, 3);
	ref.c = VectorXd::Zero(n);
	ref.h = VectorXd::Zero(n);

	Tape t;
	BoundCell cell = bind(t, p);
	CellState state = restore(t, zero_state(p.shape));
	double worst = 0.0;
	for (int step = 0; step < 100; ++step) {
		VectorXd x(input);
		for (int i = 0; i < input; ++i) {
			x(i) = uniform(rng, -2, 2);
		}
		auto r = cell_step(cell, state, t.constant(x));
		state = r.state;
		ref.step(x);
		worst = std::max(worst, (r.y.value() - ref.h.head(s_y)).cwiseAbs().maxCoeff());
		worst = std::max(worst, (state.c.back().value() - ref.c).cwiseAbs().maxCoeff());
	}
	CHECK(worst <= 1e-12);
}

TEST_CASE("cell_step gradients agree with central differences") {
	for (auto variant : {CellVariant::Full, CellVariant::NoFusion, CellVariant::NoDilation, CellVariant::NoRecent,
	                     CellVariant::ClassicLstm}) {
		CAPTURE(to_string(variant));
		Rng rng(55);
		DRnnCellParams p = init_params(4, 5, 2, 3, 2, rng, variant);
		p.b = MatrixXd::Random(p.b.rows(), 1) * 0.3;
		std::vector<VectorXd> xs;
		for (int i = 0; i < 3; ++i) {
			xs.push_back(VectorXd::Random(4));
		}
		const VectorXd target = VectorXd::Random(3);
		MatrixXd *ptrs[] = {&p.W, &p.V, &p.U, &p.b};
		const std::array<std::string, 4> names{"W", "V", "U", "b"};
		auto loss = [&](Tape &t, std::span<const Var> v) {
			BoundCell cell{&p, v[0], v[1], v[2], v[3]};
			CellState state = restore(t, zero_state(p.shape));
			Var acc = t.constant(0.0);
			for (const auto &x : xs) {
				auto r = cell_step(cell, state, t.constant(x));
				state = r.state;
				Var e = r.y - t.constant(target);
				acc = acc + sum(hadamard(e, e));
			}
			return acc;
		};
		const auto report = grad_check(loss, std::span<MatrixXd *const>(ptrs), names, 1e-5);
		for (const auto &e : report.entries) {
			CAPTURE(e.name);
			CHECK(e.max_rel_error < 1e-5);
		}
		CHECK(report.passed);
	}
}

TEST_CASE("parameter initialisation") {
	Rng a(1);
	CHECK_NOTHROW(init_params(197, 100, 40, 60, 2, a));
	CHECK_THROWS_AS(init_params(197, 90, 40, 60, 2, a), ValidationError);
	CHECK_THROWS_AS(init_params(197, 100, 40, 60, 0, a), ValidationError);

	Rng r1(5), r2(5), r3(6);
	const DRnnCellParams p1 = init_params(10, 8, 3, 5, 2, r1);
	const DRnnCellParams p2 = init_params(10, 8, 3, 5, 2, r2);
	const DRnnCellParams p3 = init_params(10, 8, 3, 5, 2, r3);
	CHECK(p1.W == p2.W);
	CHECK(p1.V == p2.V);
	CHECK(p1.U == p2.U);
	CHECK(p1.W != p3.W);
	CHECK(p1.b.isZero(0.0));
	const double r = 1.0 / std::sqrt(10.0 + 2 * 3.0);
	CHECK(p1.W.cwiseAbs().maxCoeff() <= r);
	CHECK(p1.W.rows() == 32);
	CHECK(p1.parameter_count() == static_cast<std::size_t>(32 * (10 + 3 + 3 + 1)));

	Rng r4(5);
	const DRnnCellParams nf = init_params(10, 8, 3, 5, 2, r4, CellVariant::NoFusion);
	CHECK(nf.W.rows() == 24);
}

TEST_CASE("input size is checked") {
	Rng rng(2);
	DRnnCellParams p = init_params(3, 5, 2, 3, 1, rng);
	Tape t;
	BoundCell cell = bind(t, p);
	CellState state = restore(t, zero_state(p.shape));
	CHECK_THROWS_AS(cell_step(cell, state, t.constant(VectorXd::Zero(4))), ShapeError);
}

TEST_CASE("output and state split the c-state width") {
	Rng rng(2);
	DRnnCellParams p = init_params(3, 7, 3, 4, 2, rng);
	Tape t;
	BoundCell cell = bind(t, p);
	CellState state = restore(t, zero_state(p.shape));
	auto r = cell_step(cell, state, t.constant(VectorXd::Ones(3)));
	CHECK(r.y.rows() == 4);
	CHECK(r.state.h.back().rows() == 3);
	CHECK(r.state.c.back().rows() == 7);
	// h' = o * c, y first and h last
	const VectorXd pre = p.W * VectorXd::Ones(3) + p.b;
	const VectorXd o = pre.segment(14, 7).unaryExpr([](double v) { return sig(v); });
	const VectorXd h_full = o.cwiseProduct(r.state.c.back().value());
	CHECK((h_full.head(4) - r.y.value()).cwiseAbs().maxCoeff() < 1e-15);
	CHECK((h_full.tail(3) - r.state.h.back().value()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("variants use the substituted histories") {
	const int d = 3;
	auto final_c = [&](CellVariant v, bool swap_history) {
		Rng local(13);
		DRnnCellParams p = init_params(2, 5, 2, 3, d, local, v);
		Tape t;
		BoundCell cell = bind(t, p);
		CellState state;
		std::vector<VectorXd> cs{VectorXd::Constant(5, 0.3), VectorXd::Constant(5, -0.2), VectorXd::Constant(5, 0.9)};
		std::vector<VectorXd> hs{VectorXd::Constant(2, 0.5), VectorXd::Constant(2, 0.1), VectorXd::Constant(2, -0.7)};
		if (swap_history) {
			// change only the states that the variant is supposed to ignore
			if (v == CellVariant::NoDilation) {
				cs[0] = VectorXd::Constant(5, 7.0);
				hs[0] = VectorXd::Constant(2, 7.0);
			} else {
				cs[2] = VectorXd::Constant(5, 7.0);
				hs[2] = VectorXd::Constant(2, 7.0);
			}
		}
		for (int k = 0; k < d; ++k) {
			state.c.push_back(t.constant(cs[k]));
			state.h.push_back(t.constant(hs[k]));
		}
		auto r = cell_step(cell, state, t.constant(VectorXd::Constant(2, 0.4)));
		return VectorXd(r.state.c.back().value());
	};
	CHECK(final_c(CellVariant::NoDilation, false) == final_c(CellVariant::NoDilation, true));
	CHECK(final_c(CellVariant::NoRecent, false) == final_c(CellVariant::NoRecent, true));
	CHECK(final_c(CellVariant::Full, false) != final_c(CellVariant::Full, true));
}
