#pragma once

#include <Eigen/Dense>
#include <functional>

namespace tcu {

/// Objective callback: returns f(x) and fills `grad` (same size as x).
using GradObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsOptions {
  int max_iterations = 500;
  double grad_tol = 1e-10;   // on the infinity norm of the projected gradient
  int memory = 10;
  double armijo_c1 = 1e-4;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;       // accepted steps
  bool converged = false;   // projected-gradient tolerance reached
};

/// Box-constrained minimization by L-BFGS directions with projected
/// backtracking line search; falls back to projected steepest descent when
/// the quasi-Newton direction fails. Pass empty bounds for an unconstrained
/// problem.
LbfgsResult minimize_projected_lbfgs(const GradObjective& objective,
                                     const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper,
                                     const LbfgsOptions& opts = {});

/// Central-difference gradient of a scalar function; steps are relative to
/// max(|x_i|, 1).
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double rel_step = 1e-6);

/// Wraps a scalar function as a GradObjective using numeric_gradient.
GradObjective with_numeric_gradient(std::function<double(const Eigen::VectorXd&)> f,
                                    double rel_step = 1e-6);

}  // namespace tcu
