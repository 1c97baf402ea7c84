#include "esdrnn/es.hpp"
#include "esdrnn/random.hpp"

#include <doctest.h>

#include <vector>

using namespace esdrnn;
using namespace esdrnn::es;

namespace {

std::vector<double> weekly_shape(std::uint64_t seed) {
	Rng rng(seed);
	std::vector<double> shape(kSeasonLength);
	for (double &v : shape) {
		v = uniform(rng, 0.6, 1.4);
	}
	return shape;
}

std::vector<double> periodic(const std::vector<double> &shape, double level, std::size_t hours) {
	std::vector<double> z(hours);
	for (std::size_t t = 0; t < hours; ++t) {
		z[t] = level * shape[t % kSeasonLength];
	}
	return z;
}

} // namespace

TEST_CASE("init_state on a constant prefix") {
	const std::vector<double> prefix(kSeasonLength, 100.0);
	const EsState s = init_state(prefix, -3.5, 0.3);
	CHECK(s.level == doctest::Approx(100.0).epsilon(1e-15));
	for (double v : s.seasonal) {
		CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
	}
	CHECK(s.alpha == doctest::Approx(0.029312).epsilon(1e-5));
	CHECK(s.beta == doctest::Approx(0.574443).epsilon(1e-6));
	CHECK(s.head == 0);
	CHECK_NOTHROW(validate(s));
}

TEST_CASE("init_state recovers a weekly shape") {
	const auto shape = weekly_shape(1);
	double mean = 0.0;
	for (double v : shape) {
		mean += v / kSeasonLength;
	}
	const auto z = periodic(shape, 100.0, kSeasonLength + 30);
	const EsState s = init_state(z, -3.5, 0.3);
	CHECK(s.level == doctest::Approx(100.0 * mean).epsilon(1e-12));
	for (std::size_t k = 0; k < kSeasonLength; ++k) {
		CHECK(s.seasonal[k] == doctest::Approx(shape[k] / mean).epsilon(1e-12));
	}
	const Eigen::VectorXd w = seasonal_window(s, 0, 24);
	for (int k = 0; k < 24; ++k) {
		CHECK(w(k) == doctest::Approx(shape[k] / mean).epsilon(1e-12));
	}
}

TEST_CASE("init_state rejects bad prefixes") {
	CHECK_THROWS_AS(init_state(std::vector<double>(167, 1.0), -3.5, 0.3), ValidationError);
	std::vector<double> z(168, 1.0);
	z[40] = 0.0;
	CHECK_THROWS_AS(init_state(z, -3.5, 0.3), ValidationError);
}

TEST_CASE("hw_step hand example") {
	EsState s = init_state(std::vector<double>(kSeasonLength, 100.0), 0.0, 0.0);
	s.seasonal[0] = 1.2;
	s.alpha = 0.5;
	s.beta = 0.5;
	const EsState next = hw_step(s, 126.0);
	CHECK(next.level == doctest::Approx(102.5).epsilon(1e-14));
	CHECK(next.seasonal[0] == doctest::Approx(1.2146341).epsilon(1e-7));
	CHECK(next.head == 1);
	CHECK_THROWS_AS(hw_step(s, 0.0), DomainError);
	CHECK_THROWS_AS(hw_step(s, -5.0), DomainError);
}

TEST_CASE("zero coefficients leave the state unchanged") {
	const auto shape = weekly_shape(2);
	EsState s = init_state(periodic(shape, 50.0, kSeasonLength), 0.0, 0.0);
	s.alpha = 0.0;
	s.beta = 0.0;
	const EsState before = s;
	Rng rng(3);
	for (int t = 0; t < 500; ++t) {
		advance_hour(s, uniform(rng, 1.0, 500.0));
	}
	CHECK(s.level == before.level);
	CHECK(s.seasonal == before.seasonal);
}

TEST_CASE("exact-fit observations are a fixed point") {
	const auto shape = weekly_shape(4);
	for (double a : {0.05, 0.4, 0.95}) {
		for (double b : {0.01, 0.5, 0.99}) {
			EsState s = init_state(periodic(shape, 80.0, kSeasonLength), 0.0, 0.0);
			s.alpha = a;
			s.beta = b;
			const EsState before = s;
			for (int t = 0; t < 400; ++t) {
				advance_hour(s, s.level * s.seasonal[s.head]);
			}
			CHECK(s.level == doctest::Approx(before.level).epsilon(1e-12));
			for (std::size_t k = 0; k < kSeasonLength; ++k) {
				CHECK(s.seasonal[k] == doctest::Approx(before.seasonal[k]).epsilon(1e-12));
			}
		}
	}
}

TEST_CASE("level is scale-equivariant") {
	Rng rng(5);
	std::vector<double> z(24 * 7 * 4);
	for (double &v : z) {
		v = uniform(rng, 50.0, 150.0);
	}
	const double k = 37.5;
	std::vector<double> zk(z.size());
	for (std::size_t i = 0; i < z.size(); ++i) {
		zk[i] = k * z[i];
	}
	EsState a = init_state(z, -1.0, 0.2);
	EsState b = init_state(zk, -1.0, 0.2);
	for (std::size_t t = kSeasonLength; t < z.size(); ++t) {
		advance_hour(a, z[t]);
		advance_hour(b, zk[t]);
	}
	CHECK(b.level / a.level == doctest::Approx(k).epsilon(1e-9));
	for (std::size_t i = 0; i < kSeasonLength; ++i) {
		CHECK(std::abs(b.seasonal[i] - a.seasonal[i]) < 1e-9);
	}
}

TEST_CASE("periodic series are reconstructed after a warm-up week") {
	const auto shape = weekly_shape(6);
	const auto z = periodic(shape, 1000.0, 4 * kSeasonLength);
	for (double a : {0.01, 0.3, 0.89}) {
		for (double b : {0.01, 0.3, 0.89}) {
			EsState s = init_state(z, 0.0, 0.0);
			s.alpha = a;
			s.beta = b;
			for (std::size_t t = kSeasonLength; t < 2 * kSeasonLength; ++t) {
				advance_hour(s, z[t]);
			}
			double worst = 0.0;
			for (std::size_t t = 2 * kSeasonLength; t < z.size(); ++t) {
				const double pred = s.level * s.seasonal[s.head];
				worst = std::max(worst, std::abs(pred - z[t]) / z[t]);
				advance_hour(s, z[t]);
			}
			CHECK(worst < 0.01);
		}
	}
}

TEST_CASE("update_coefficients") {
	EsState s = init_state(std::vector<double>(kSeasonLength, 10.0), -3.5, 0.3);
	EsState u = update_coefficients(s, 0.0, 0.0);
	CHECK(u.alpha == doctest::Approx(0.029312).epsilon(1e-5));
	CHECK(u.beta == doctest::Approx(0.574443).epsilon(1e-6));
	CHECK(update_coefficients(s, 3.5, 0.0).alpha == 0.5);
	CHECK(update_coefficients(s, 30.0, 0.0).alpha > 0.999999);

	double prev = 0.0;
	for (double d = -10.0; d <= 10.0; d += 0.5) {
		const double a = update_coefficients(s, d, 0.0).alpha;
		CHECK(a > prev);
		prev = a;
	}
	Rng rng(8);
	for (int i = 0; i < 200; ++i) {
		s = update_coefficients(s, uniform(rng, -20, 20), uniform(rng, -20, 20));
		CHECK(s.alpha > 0.0);
		CHECK(s.alpha < 1.0);
		CHECK(s.beta > 0.0);
		CHECK(s.beta < 1.0);
	}
	CHECK_THROWS_AS(update_coefficients(s, std::nan(""), 0.0), NumericError);
}

TEST_CASE("seasonal_window") {
	const EsState flat = init_state(std::vector<double>(kSeasonLength, 3.0), 0.0, 0.0);
	CHECK(seasonal_window(flat, 0, 24).isOnes(0.0));
	CHECK(seasonal_window(flat, 144, 24).size() == 24);
	CHECK_THROWS_AS(seasonal_window(flat, 168, 1), ValidationError);
	CHECK_THROWS_AS(seasonal_window(flat, 150, 24), ValidationError);

	// the window follows the ring head
	const auto shape = weekly_shape(9);
	EsState s = init_state(periodic(shape, 1.0, kSeasonLength), 0.0, 0.0);
	s.alpha = 0.0;
	s.beta = 0.0;
	for (int t = 0; t < 30; ++t) {
		advance_hour(s, 1.0);
	}
	const Eigen::VectorXd w = seasonal_window(s, 5, 10);
	for (int k = 0; k < 10; ++k) {
		CHECK(w(k) == s.seasonal[(30 + 5 + k) % kSeasonLength]);
	}
}
