#pragma once

// BFGS with central-difference gradients for objectives that may be
// infeasible (+inf) on parts of the domain. Infeasible trial points are
// handled by backtracking, which is how box bounds and inner root-finding
// failures are enforced by callers.

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace spglm::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Options {
  int max_iterations = 500;
  double ftol = 1e-8;       // relative objective change
  double gtol = 1e-5;       // gradient sup-norm
  double grad_step = 1e-6;  // relative central-difference step
  double max_step = 1.0;    // sup-norm cap on a single line-search step
  int stall_iterations = 20;       // stop after this many steps with change <= stall_ftol
  double stall_ftol = 1e-12;       // relative objective change counted as no progress
  double stall_gtol_factor = 100;  // converged at such a stop when |g| <= factor * gtol
};

struct Result {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Central differences with step grad_step * max(1, |x_i|); falls back to a
/// one-sided difference when one side is infeasible.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, double rel_step,
                                   long* evaluations = nullptr);

/// Minimizes f from x0. Throws ConvergenceError when f(x0) is not finite.
Result minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const Options& opt = {});

struct Hessian {
  Eigen::MatrixXd matrix;     // symmetrized
  double max_asymmetry = 0.0; // relative, before symmetrization
};

/// Hessian from central differences of numerical gradients.
Hessian numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double rel_step = 1e-4);

}  // namespace spglm::optim
