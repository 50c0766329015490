#pragma once

#include <Eigen/Dense>

#include <functional>

namespace garchrank {

// Objective returning f(z) and filling grad. Returning +inf (or NaN) marks z
// as infeasible; the line search then backs off.
using GradientObjective = std::function<double(const Eigen::VectorXd& z, Eigen::VectorXd& grad)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 500;
  double max_step = 2.0;  // cap on the infinity norm of a trial step
};

struct BfgsResult {
  Eigen::VectorXd z;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

// Quasi-Newton minimization with an Armijo backtracking line search.
BfgsResult minimize_bfgs(const GradientObjective& f, Eigen::VectorXd z0,
                         const BfgsOptions& options = {});

}  // namespace garchrank
