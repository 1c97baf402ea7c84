#include "esdrnn/autodiff.hpp"
#include "esdrnn/random.hpp"

#include <doctest.h>

#include <array>
#include <cstring>
#include <functional>

using namespace esdrnn;
using namespace esdrnn::ad;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(Rng &rng, Eigen::Index r, Eigen::Index c, double lo = -2.0, double hi = 2.0) {
	MatrixXd m(r, c);
	for (Eigen::Index i = 0; i < m.size(); ++i) {
		m.data()[i] = uniform(rng, lo, hi);
	}
	return m;
}

// Weighted sum with fixed random weights so every output element matters.
Var weighted(Tape &t, Var v, std::uint64_t seed) {
	Rng rng(seed);
	return sum(hadamard(v, t.constant(random_matrix(rng, v.rows(), v.cols()))));
}

using UnaryBuilder = std::function<Var(Tape &, std::span<const Var>)>;

struct PrimitiveCase {
	const char *name;
	std::vector<std::pair<int, int>> shapes;
	UnaryBuilder build;
	double lo = -2.0;
};

std::vector<PrimitiveCase> primitive_cases() {
	return {
	    {"matmul", {{3, 4}, {4, 2}}, [](Tape &t, std::span<const Var> v) { return weighted(t, matmul(v[0], v[1]), 1); }},
	    {"add", {{3, 2}, {3, 2}}, [](Tape &t, std::span<const Var> v) { return weighted(t, add(v[0], v[1]), 2); }},
	    {"subtract",
	     {{3, 2}, {3, 2}},
	     [](Tape &t, std::span<const Var> v) { return weighted(t, subtract(v[0], v[1]), 3); }},
	    {"hadamard",
	     {{4, 1}, {4, 1}},
	     [](Tape &t, std::span<const Var> v) { return weighted(t, hadamard(v[0], v[1]), 4); }},
	    {"concat_rows",
	     {{2, 1}, {3, 1}},
	     [](Tape &t, std::span<const Var> v) { return weighted(t, concat_rows({v[0], v[1]}), 5); }},
	    {"slice_rows", {{6, 2}}, [](Tape &t, std::span<const Var> v) { return weighted(t, slice_rows(v[0], 1, 3), 6); }},
	    {"sigmoid", {{5, 1}}, [](Tape &t, std::span<const Var> v) { return weighted(t, sigmoid(v[0]), 7); }},
	    {"tanh", {{5, 1}}, [](Tape &t, std::span<const Var> v) { return weighted(t, ad::tanh(v[0]), 8); }},
	    {"exp", {{5, 1}}, [](Tape &t, std::span<const Var> v) { return weighted(t, ad::exp(v[0]), 9); }},
	    {"log", {{5, 1}}, [](Tape &t, std::span<const Var> v) { return weighted(t, ad::log(v[0]), 10); }, 0.2},
	    {"scalar_mul",
	     {{3, 3}},
	     [](Tape &t, std::span<const Var> v) { return weighted(t, scalar_mul(v[0], -1.7), 11); }},
	    {"sum", {{3, 3}}, [](Tape &t, std::span<const Var> v) { return scalar_mul(sum(v[0]), 0.3); }},
	    {"mean", {{3, 3}}, [](Tape &t, std::span<const Var> v) { return scalar_mul(mean(v[0]), 0.3); }},
	};
}

} // namespace

TEST_CASE("forward values of primitives") {
	Tape t;
	CHECK(sigmoid(t.constant(0.0)).scalar() == 0.5);
	MatrixXd a(2, 1), b(2, 1);
	a << 1, 2;
	b << 3, 4;
	const MatrixXd h = hadamard(t.constant(a), t.constant(b)).value();
	CHECK(h(0) == 3.0);
	CHECK(h(1) == 8.0);
	CHECK(concat_rows({t.constant(a), t.constant(b)}).rows() == 4);
	CHECK(mean(t.constant(b)).scalar() == 3.5);
}

TEST_CASE("every primitive agrees with central differences") {
	for (const auto &c : primitive_cases()) {
		CAPTURE(c.name);
		Rng rng(100);
		std::vector<MatrixXd> storage;
		for (auto [r, cols] : c.shapes) {
			storage.push_back(random_matrix(rng, r, cols, c.lo, 2.0));
		}
		std::vector<MatrixXd *> ptrs;
		for (auto &m : storage) {
			ptrs.push_back(&m);
		}
		const auto report = grad_check(c.build, std::span<MatrixXd *const>(ptrs), {}, 1e-6);
		CHECK(report.passed);
		CHECK(report.max_error() < 1e-6);
	}
}

TEST_CASE("sigmoid slope at zero") {
	MatrixXd x = MatrixXd::Zero(1, 1);
	Tape t;
	Var v = t.leaf(x);
	t.backward(sigmoid(v));
	const double analytic = t.gradient(v)(0, 0);
	CHECK(analytic == doctest::Approx(0.25).epsilon(1e-15));
	auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
	const double h = 1e-5;
	const double numeric = (sig(h) - sig(-h)) / (2 * h);
	CHECK(std::abs(analytic - numeric) < 1e-8);
}

TEST_CASE("backward examples") {
	SUBCASE("square") {
		MatrixXd x = MatrixXd::Constant(1, 1, 3.0);
		Tape t;
		Var v = t.leaf(x);
		t.backward(hadamard(v, v));
		CHECK(t.gradient(v)(0, 0) == 6.0);
	}
	SUBCASE("sum of sigmoid(Wx)") {
		Rng rng(42);
		MatrixXd W = random_matrix(rng, 4, 3);
		const MatrixXd x = random_matrix(rng, 3, 1);
		MatrixXd *ptrs[] = {&W};
		const auto report = grad_check(
		    [&](Tape &t, std::span<const Var> v) { return sum(sigmoid(matmul(v[0], t.constant(x)))); },
		    std::span<MatrixXd *const>(ptrs), std::array<std::string, 1>{"W"}, 1e-6);
		CHECK(report.passed);
		REQUIRE(report.entries.size() == 1);
		CHECK(report.entries[0].name == "W");
		CHECK(report.entries[0].probed == 12);
	}
	SUBCASE("constant graph") {
		MatrixXd w = MatrixXd::Constant(2, 2, 1.5);
		Tape t;
		Var leaf = t.leaf(w);
		Var loss = sum(sigmoid(t.constant(MatrixXd::Ones(2, 2))));
		t.backward(loss);
		CHECK(t.gradient(leaf).isZero(0.0));
	}
}

TEST_CASE("errors") {
	Tape t;
	Var a = t.constant(MatrixXd::Ones(2, 3));
	Var b = t.constant(MatrixXd::Ones(2, 2));
	try {
		matmul(a, b);
		FAIL("expected a shape error");
	} catch (const ShapeError &e) {
		const std::string msg = e.what();
		CHECK(msg.find("2x3") != std::string::npos);
		CHECK(msg.find("2x2") != std::string::npos);
	}
	CHECK_THROWS_AS(add(a, b), ShapeError);
	CHECK_THROWS_AS(hadamard(a, b), ShapeError);
	CHECK_THROWS_AS(slice_rows(a, 1, 2), ShapeError);
	CHECK_THROWS_AS(ad::log(t.constant(MatrixXd::Zero(1, 1))), DomainError);
	CHECK_THROWS_AS(t.backward(a), ShapeError);
	CHECK_THROWS_AS(ad::exp(t.constant(MatrixXd::Constant(1, 1, 1e6))), NumericError);
	CHECK_THROWS_AS(t.constant(std::nan("")), NumericError);
}

TEST_CASE("a corrupted backward rule is caught") {
	Rng rng(1);
	MatrixXd x = random_matrix(rng, 3, 1);
	MatrixXd *ptrs[] = {&x};
	auto bad_square = [](Tape &t, std::span<const Var> v) {
		const Var &a = v[0];
		Var y = t.record(a.value().cwiseProduct(a.value()), {a},
		                 [](Tape &tp, std::size_t self) {
			                 const std::size_t p = tp.parent(self, 0);
			                 // should be 2 * x
			                 tp.accumulate(p) += tp.upstream(self).cwiseProduct(tp.value(p));
		                 },
		                 "bad_square");
		return sum(y);
	};
	const auto report = grad_check(bad_square, std::span<MatrixXd *const>(ptrs), {}, 1e-6);
	CHECK_FALSE(report.passed);
	CHECK(report.max_error() > 0.1);
}

TEST_CASE("gradients are linear in the loss") {
	Rng rng(9);
	MatrixXd W = random_matrix(rng, 3, 3);
	const MatrixXd x = random_matrix(rng, 3, 1);
	auto f = [&](Tape &t, Var w) { return sum(ad::tanh(matmul(w, t.constant(x)))); };
	auto g = [&](Tape &t, Var w) { return mean(ad::exp(scalar_mul(w, 0.5))); };
	auto grad = [&](auto build) {
		Tape t;
		Var w = t.leaf(W);
		t.backward(build(t, w));
		return MatrixXd(t.gradient(w));
	};
	const double a = 2.5;
	const double b = -0.75;
	const MatrixXd gf = grad(f);
	const MatrixXd gg = grad(g);
	const MatrixXd combined = grad([&](Tape &t, Var w) { return scalar_mul(f(t, w), a) + scalar_mul(g(t, w), b); });
	CHECK((combined - (a * gf + b * gg)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward is deterministic") {
	Rng rng(77);
	MatrixXd W = random_matrix(rng, 8, 5);
	const MatrixXd x = random_matrix(rng, 5, 1);
	auto run = [&] {
		Tape t;
		Var w = t.leaf(W);
		Var h = sigmoid(matmul(w, t.constant(x)));
		Var loss = mean(hadamard(h, ad::tanh(h)));
		t.backward(loss);
		return MatrixXd(t.gradient(w));
	};
	const MatrixXd g1 = run();
	const MatrixXd g2 = run();
	CHECK(std::memcmp(g1.data(), g2.data(), sizeof(double) * static_cast<std::size_t>(g1.size())) == 0);
}

TEST_CASE("gradients accumulate over shared subexpressions") {
	MatrixXd x = MatrixXd::Constant(1, 1, 0.7);
	Tape t;
	Var v = t.leaf(x);
	Var s = sigmoid(v);
	t.backward(s + s + hadamard(s, v));
	const double sv = 1.0 / (1.0 + std::exp(-0.7));
	const double ds = sv * (1 - sv);
	CHECK(t.gradient(v)(0, 0) == doctest::Approx(2 * ds + ds * 0.7 + sv).epsilon(1e-14));
}
