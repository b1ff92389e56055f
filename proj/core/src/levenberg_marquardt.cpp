#include "semcom/levenberg_marquardt.hpp"

#include <Eigen/Cholesky>

namespace semcom {

LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd initial,
                             const LmOptions& options) {
  LmResult out;
  out.params = std::move(initial);
  const Eigen::Index n = out.params.size();

  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  problem(out.params, residuals, &jacobian);
  out.cost = residuals.squaredNorm();
  out.cost_history.push_back(out.cost);
  if (n == 0) {
    out.converged = true;
    return out;
  }

  double lambda = options.initial_lambda;
  Eigen::VectorXd trial_residuals;
  for (int it = 1; it <= options.max_iterations; ++it) {
    out.iterations = it;
    const Eigen::MatrixXd normal = jacobian.transpose() * jacobian;
    const Eigen::VectorXd gradient = jacobian.transpose() * residuals;
    const Eigen::MatrixXd damped = normal + lambda * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
    if (!step.allFinite() || step.norm() < options.step_tolerance) {
      out.converged = step.allFinite();
      break;
    }
    const Eigen::VectorXd trial = out.params + step;
    problem(trial, trial_residuals, nullptr);
    const double trial_cost = trial_residuals.squaredNorm();
    if (trial_cost < out.cost) {
      const double gain = out.cost - trial_cost;
      out.params = trial;
      out.cost = trial_cost;
      out.cost_history.push_back(trial_cost);
      problem(out.params, residuals, &jacobian);
      lambda /= options.lambda_factor;
      if (gain < options.cost_change_tolerance) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= options.lambda_factor;
    }
  }
  return out;
}

}  // namespace semcom
