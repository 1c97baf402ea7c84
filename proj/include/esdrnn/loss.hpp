#pragma once

// Quantile (pinball) losses for the point forecast and the two interval bounds.

#include "esdrnn/autodiff.hpp"
#include "esdrnn/network.hpp"

#include <Eigen/Dense>

namespace esdrnn {

struct LossConfig {
	double q_center = 0.49;
	double q_lower = 0.035;
	double q_upper = 0.96;
	double gamma = 0.3;

	void validate() const;
};

/// (z - z_hat) q when z >= z_hat, else (z - z_hat)(q - 1).
double pinball(double z, double z_hat, double q);

/// Elementwise pinball of a prediction vector against fixed targets. At
/// z == z_hat the z >= z_hat branch supplies the slope.
ad::Var pinball(const ad::Var &z_hat, const Eigen::VectorXd &z, double q);

/// Loss of one forecasting step on normalised targets z' = z / z_bar:
/// mean over hours of rho(z', e^x_hat s, q*) + gamma [rho(z', e^x_lower s, q_lo) + rho(z', e^x_upper s, q_up)].
/// `s_hat` holds the raw seasonal factors of the output hours (24x1).
ad::Var step_loss(const NetworkOutputVars &out, const ad::Var &s_hat, const Eigen::VectorXd &z_normalized,
                  const LossConfig &cfg);

/// Value-only counterpart of step_loss.
double step_loss_value(const NetworkOutput &out, const Eigen::VectorXd &s_hat, const Eigen::VectorXd &z_normalized,
                       const LossConfig &cfg);

} // namespace esdrnn
