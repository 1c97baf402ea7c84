#include "esdrnn/loss.hpp"

#include <cmath>

namespace esdrnn {

namespace {

void check_quantile(double q) {
	if (!(q > 0.0 && q < 1.0)) {
		throw DomainError("pinball: quantile order must lie in (0, 1), got " + std::to_string(q));
	}
}

} // namespace

void LossConfig::validate() const {
	if (!(0.0 < q_lower && q_lower < q_center && q_center < q_upper && q_upper < 1.0)) {
		throw ValidationError("loss: quantiles must satisfy 0 < q_lower < q_center < q_upper < 1");
	}
	if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
		throw ValidationError("loss: gamma must be non-negative");
	}
}

double pinball(double z, double z_hat, double q) {
	check_quantile(q);
	const double e = z - z_hat;
	return e >= 0.0 ? e * q : e * (q - 1.0);
}

ad::Var pinball(const ad::Var &z_hat, const Eigen::VectorXd &z, double q) {
	check_quantile(q);
	if (z_hat.rows() != z.size() || z_hat.cols() != 1) {
		throw ShapeError("pinball: prediction and target lengths differ");
	}
	const Eigen::ArrayXd e = z.array() - z_hat.value().array();
	// derivative w.r.t. the prediction: -q above, 1 - q below
	Eigen::MatrixXd slope = (e >= 0.0).select(Eigen::ArrayXd::Constant(e.size(), -q), 1.0 - q).matrix();
	Eigen::MatrixXd value = (e >= 0.0).select(e * q, e * (q - 1.0)).matrix();
	return z_hat.tape->record(std::move(value), {z_hat},
	                          [slope = std::move(slope)](ad::Tape &tp, std::size_t self) {
		                          tp.accumulate(tp.parent(self, 0)) += tp.upstream(self).cwiseProduct(slope);
	                          },
	                          "pinball");
}

ad::Var step_loss(const NetworkOutputVars &out, const ad::Var &s_hat, const Eigen::VectorXd &z_normalized,
                  const LossConfig &cfg) {
	using namespace ad;
	Var center = mean(pinball(hadamard(exp(out.x_hat), s_hat), z_normalized, cfg.q_center));
	if (cfg.gamma == 0.0) {
		return center;
	}
	Var lower = mean(pinball(hadamard(exp(out.x_lower), s_hat), z_normalized, cfg.q_lower));
	Var upper = mean(pinball(hadamard(exp(out.x_upper), s_hat), z_normalized, cfg.q_upper));
	return center + scalar_mul(lower + upper, cfg.gamma);
}

double step_loss_value(const NetworkOutput &out, const Eigen::VectorXd &s_hat, const Eigen::VectorXd &z_normalized,
                       const LossConfig &cfg) {
	const Eigen::Index n = z_normalized.size();
	if (out.x_hat.size() != n || s_hat.size() != n || out.x_lower.size() != n || out.x_upper.size() != n) {
		throw ShapeError("step_loss: length mismatch");
	}
	double center = 0.0;
	double bounds = 0.0;
	for (Eigen::Index i = 0; i < n; ++i) {
		const double z = z_normalized(i);
		center += pinball(z, std::exp(out.x_hat(i)) * s_hat(i), cfg.q_center);
		bounds += pinball(z, std::exp(out.x_lower(i)) * s_hat(i), cfg.q_lower) +
		          pinball(z, std::exp(out.x_upper(i)) * s_hat(i), cfg.q_upper);
	}
	return (center + cfg.gamma * bounds) / static_cast<double>(n);
}

} // namespace esdrnn
