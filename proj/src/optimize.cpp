#include "garchrank/optimize.hpp"

#include <cmath>
#include <limits>

namespace garchrank {

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

BfgsResult minimize_bfgs(const GradientObjective& f, Eigen::VectorXd z0,
                         const BfgsOptions& options) {
  const Eigen::Index d = z0.size();
  BfgsResult res;
  res.z = std::move(z0);
  res.gradient = Eigen::VectorXd::Zero(d);
  res.value = f(res.z, res.gradient);
  if (!finite(res.value) || !res.gradient.allFinite()) {
    res.value = std::numeric_limits<double>::infinity();
    return res;
  }

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g_new(d);
  int stalled = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it;
    if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -h_inv * res.gradient;
    double slope = dir.dot(res.gradient);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      dir = -res.gradient;
      slope = dir.dot(res.gradient);
    }
    const double dmax = dir.lpNorm<Eigen::Infinity>();
    if (dmax > options.max_step) {
      dir *= options.max_step / dmax;
      slope *= options.max_step / dmax;
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd z_new(d);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      z_new = res.z + step * dir;
      f_new = f(z_new, g_new);
      if (finite(f_new) && g_new.allFinite() && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible along the quasi-Newton direction; restart once
      // from steepest descent before giving up.
      if (stalled++ > 0) return res;
      h_inv.setIdentity();
      continue;
    }

    const Eigen::VectorXd s = z_new - res.z;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double sy = s.dot(y);
    const double f_old = res.value;
    res.z = z_new;
    res.value = f_new;
    res.gradient = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (it == 0) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
      h_inv = (id - rho * s * y.transpose()) * h_inv * (id - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    if (std::abs(f_old - f_new) <= 1e-15 * (1.0 + std::abs(f_new)) &&
        s.lpNorm<Eigen::Infinity>() < 1e-12) {
      if (stalled++ > 2) return res;
    } else {
      stalled = 0;
    }
  }
  res.iterations = options.max_iterations;
  res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
  return res;
}

}  // namespace garchrank
