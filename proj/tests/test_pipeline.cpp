#include "esdrnn/pipeline.hpp"

#include <doctest.h>

#include <optional>

using namespace esdrnn;
using Eigen::VectorXd;

namespace {

std::vector<double> weekly_shape(std::uint64_t seed) {
	Rng rng(seed);
	std::vector<double> shape(es::kSeasonLength);
	for (double &v : shape) {
		v = uniform(rng, 0.7, 1.3);
	}
	return shape;
}

HourlySeries noisy_series(std::uint64_t seed, int days, double scale = 1000.0) {
	Rng rng(seed);
	const auto shape = weekly_shape(seed + 1);
	HourlySeries s{"N", Timestamp::from_date(2018, 1, 1), {}};
	for (int t = 0; t < 24 * days; ++t) {
		s.values.push_back(scale * shape[t % 168] * uniform(rng, 0.9, 1.1));
	}
	return s;
}

// State that has consumed every hour before `until`, starting from the first week.
es::EsState state_until(const HourlySeries &s, std::size_t until, double ia = -1.0, double ib = 0.2) {
	es::EsState st = es::init_state(std::span<const double>(s.values).first(168), ia, ib);
	for (std::size_t t = 168; t < until; ++t) {
		es::advance_hour(st, s.values[t]);
	}
	return st;
}

} // namespace

TEST_CASE("exact-fit series give zero patterns") {
	const auto shape = weekly_shape(1);
	HourlySeries s{"P", Timestamp::from_date(2018, 1, 1), {}};
	for (int t = 0; t < 24 * 21; ++t) {
		s.values.push_back(500.0 * shape[t % 168]);
	}
	const std::size_t start = 24 * 9;
	const auto st = state_until(s, start + 168, 0.3, -0.4);
	const TrainingSample sample = make_sample(s, st, start);
	CHECK(sample.x_in.cwiseAbs().maxCoeff() < 1e-12);
	REQUIRE(sample.has_target);
	CHECK(sample.x_out.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant series") {
	HourlySeries s{"C", Timestamp::from_date(2018, 1, 1), std::vector<double>(24 * 10, 100.0)};
	const auto st = state_until(s, 24 + 168);
	const TrainingSample sample = make_sample(s, st, 24);
	CHECK(sample.x_in.isZero(1e-15));
	CHECK(sample.x_out.isZero(1e-15));
	CHECK(sample.level_log == doctest::Approx(2.0).epsilon(1e-15));
	CHECK(sample.s_hat.isZero(1e-15));
	CHECK(sample.z_bar == 100.0);
	CHECK(sample.forecast_start == Timestamp::from_date(2018, 1, 9));
	CHECK(sample.calendar.day_of_week == 1);
	CHECK(sample.x_in.size() == 168);
	CHECK(sample.s_hat.size() == 24);
	CHECK(sample.network_input().calendar.size() == 90);
}

TEST_CASE("patterns are scale-invariant") {
	const HourlySeries a = noisy_series(2, 30);
	for (double k : {2.0, 0.01, 1234.5}) {
		HourlySeries b = a;
		for (double &v : b.values) {
			v *= k;
		}
		const std::size_t start = 24 * 12;
		const TrainingSample sa = make_sample(a, state_until(a, start + 168), start);
		const TrainingSample sb = make_sample(b, state_until(b, start + 168), start);
		CHECK((sa.x_in - sb.x_in).cwiseAbs().maxCoeff() < 1e-9);
		CHECK((sa.x_out - sb.x_out).cwiseAbs().maxCoeff() < 1e-9);
		CHECK((sa.s_hat - sb.s_hat).cwiseAbs().maxCoeff() < 1e-9);
		CHECK(sb.level_log - sa.level_log == doctest::Approx(std::log10(k)).epsilon(1e-12));
	}
}

TEST_CASE("postprocess inverts the output pattern") {
	const HourlySeries s = noisy_series(3, 30);
	for (std::size_t start : {std::size_t{24}, std::size_t{24 * 7}, std::size_t{24 * 20}}) {
		const TrainingSample sample = make_sample(s, state_until(s, start + 168), start);
		const VectorXd z = postprocess(sample.x_out, sample.z_bar, sample.s_hat_out_raw);
		for (int h = 0; h < 24; ++h) {
			const double actual = s.values[start + 168 + h];
			CHECK(std::abs(z(h) - actual) / actual < 1e-9);
		}
		// x_hat = 0 reproduces the level-seasonal baseline, ln 2 doubles it
		const VectorXd base = postprocess(VectorXd::Zero(24), sample.z_bar, sample.s_hat_out_raw);
		CHECK((base - sample.z_bar * sample.s_hat_out_raw).cwiseAbs().maxCoeff() < 1e-9);
		const VectorXd doubled = postprocess(VectorXd::Constant(24, std::log(2.0)), sample.z_bar, sample.s_hat_out_raw);
		CHECK((doubled - 2.0 * base).cwiseAbs().maxCoeff() < 1e-9);
	}
	CHECK_THROWS_AS(postprocess(VectorXd::Zero(24), -1.0, VectorXd::Ones(24)), DomainError);
	CHECK_THROWS_AS(postprocess(VectorXd::Constant(24, NAN), 1.0, VectorXd::Ones(24)), NumericError);
	CHECK_THROWS_AS(postprocess(VectorXd::Zero(23), 1.0, VectorXd::Ones(24)), ShapeError);
}

TEST_CASE("consecutive windows overlap by 144 hours") {
	const HourlySeries s = noisy_series(4, 30);
	es::EsState st = state_until(s, 168);
	std::optional<TrainingSample> prev;
	for (std::size_t start = 0; start + 192 <= s.size(); start += 24) {
		const TrainingSample cur = make_sample(s, st, start);
		if (prev) {
			CHECK(cur.input_start == prev->input_start + 24);
			// the previous output day is the last day of the current input window
			const VectorXd prev_out = prev->z_out_normalized * prev->z_bar;
			for (int h = 0; h < 24; ++h) {
				CHECK(prev_out(h) == doctest::Approx(s.values[cur.input_start + 144 + h]).epsilon(1e-14));
			}
		}
		prev = cur;
		st = advance_day(s, st, start + 168, 0.0, 0.0);
	}
}

TEST_CASE("window range errors") {
	const HourlySeries s = noisy_series(5, 8);
	const auto st = state_until(s, 168);
	CHECK_THROWS_AS(make_sample(s, st, 24 * 2), ValidationError);
	const TrainingSample tail = make_sample(s, state_until(s, 24 * 8), 24);
	CHECK_FALSE(tail.has_target);
	CHECK_THROWS_AS(advance_day(s, st, 24 * 8 - 10, 0.0, 0.0), ValidationError);
}

TEST_CASE("deseasonalisation can be switched off") {
	const HourlySeries s = noisy_series(6, 20);
	const auto st = state_until(s, 24 * 3 + 168);
	const TrainingSample sample = make_sample(s, st, 24 * 3, false);
	CHECK(sample.s_hat.isZero(0.0));
	CHECK(sample.s_hat_out_raw.isOnes(0.0));
	for (int i = 0; i < 168; ++i) {
		CHECK(sample.x_in(i) == doctest::Approx(std::log(s.values[24 * 3 + i] / sample.z_bar)).epsilon(1e-14));
	}
}

TEST_CASE("advance_day bookkeeping") {
	const HourlySeries s = noisy_series(7, 20);
	es::EsState st = state_until(s, 168, -3.5, 0.3);
	const std::size_t head = st.head;
	for (int day = 0; day < 10; ++day) {
		st = advance_day(s, st, 168 + 24 * day, 0.0, 0.0);
		CHECK(st.alpha == doctest::Approx(es::sigmoid(-3.5)).epsilon(1e-15));
		CHECK(st.beta == doctest::Approx(es::sigmoid(0.3)).epsilon(1e-15));
		CHECK(st.head == (head + 24 * (day + 1)) % 168);
	}
	const es::EsState moved = advance_day(s, st, 168 + 24 * 10, 3.5, -0.3);
	CHECK(moved.alpha == 0.5);
	CHECK(moved.beta == 0.5);

	// the hours themselves run with the coefficients held before the update
	es::EsState manual = st;
	for (int h = 0; h < 24; ++h) {
		es::advance_hour(manual, s.values[168 + 240 + h]);
	}
	CHECK(manual.level == moved.level);
	CHECK(manual.seasonal == moved.seasonal);
}

TEST_CASE("coefficient tangents match finite differences") {
	const HourlySeries s = noisy_series(8, 20);
	es::EsState st = state_until(s, 168 + 24 * 5, 0.0, 0.0);
	st.alpha = 0.3;
	st.beta = 0.6;
	const std::size_t first = 168 + 24 * 5;

	es::EsState tracked = st;
	const DayTangents j = advance_day_tracked(s, tracked, first);

	es::EsState plain = st;
	for (int h = 0; h < 24; ++h) {
		es::advance_hour(plain, s.values[first + h]);
	}
	CHECK(tracked.level == plain.level);
	CHECK(tracked.head == plain.head);
	CHECK(tracked.seasonal == plain.seasonal);

	auto written = [&](double a, double b) {
		es::EsState x = st;
		x.alpha = a;
		x.beta = b;
		for (int h = 0; h < 24; ++h) {
			es::advance_hour(x, s.values[first + h]);
		}
		VectorXd out(24);
		for (int h = 0; h < 24; ++h) {
			out(h) = x.seasonal[(st.head + h) % 168];
		}
		return out;
	};
	const double eps = 1e-6;
	const VectorXd da = (written(0.3 + eps, 0.6) - written(0.3 - eps, 0.6)) / (2 * eps);
	const VectorXd db = (written(0.3, 0.6 + eps) - written(0.3, 0.6 - eps)) / (2 * eps);
	CHECK((j.col(0) - da).cwiseAbs().maxCoeff() < 1e-7);
	CHECK((j.col(1) - db).cwiseAbs().maxCoeff() < 1e-7);
	CHECK(j.col(0).cwiseAbs().maxCoeff() > 1e-4);
}
