#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace semcom {

struct LmOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;         // stop when |step| falls below
  double cost_change_tolerance = 1e-12;  // stop when an accepted step gains less
  double initial_lambda = 1e-3;
  double lambda_factor = 10.0;           // x on rejection, / on acceptance
};

struct LmResult {
  Eigen::VectorXd params;
  double cost = 0.0;                // sum of squared residuals
  std::vector<double> cost_history; // initial cost, then one entry per accepted step
  int iterations = 0;
  bool converged = false;
};

/// Residuals at `params`; fills `jacobian` (rows = residuals) when non-null.
using LmProblem =
    std::function<void(const Eigen::VectorXd& params, Eigen::VectorXd& residuals,
                       Eigen::MatrixXd* jacobian)>;

/// Damped Gauss-Newton with additive damping (J^T J + lambda I). A trial step
/// is accepted only when it strictly lowers the cost, so `cost_history` is
/// non-increasing.
LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd initial,
                             const LmOptions& options = {});

}  // namespace semcom
