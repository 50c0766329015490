#pragma once

#include "garchrank/garch.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace garchrank {

struct FitOptions {
  InitRule init_rule = InitRule::Omega;
  std::size_t starts = 3;
  double tolerance = 1e-6;  // infinity norm of the gradient in log coordinates
  int max_iterations = 500;
};

struct FitResult {
  GarchSpec spec_hat;
  double objective = 0.0;
  std::vector<double> sigma2;
  std::vector<double> residuals;
  bool converged = false;
  int iterations = 0;
  InitRule init_rule = InitRule::Omega;
  // Some alpha or beta estimate fell within 1e-8 of zero and was clamped.
  bool at_boundary = false;
  double gradient_norm = 0.0;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::optional<FitResult> best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const std::optional<FitResult>& best_partial() const { return best_; }

 private:
  std::optional<FitResult> best_;
};

// (1/n) sum_t [log sigma~_t^2 + X_t^2 / sigma~_t^2].
double negative_quasi_loglik(const GarchSpec& spec, std::span<const double> x,
                             InitRule init = InitRule::Omega);

struct QuasiLoglik {
  double value = 0.0;
  Eigen::VectorXd gradient;  // with respect to theta
};

QuasiLoglik negative_quasi_loglik_gradient(const GarchSpec& spec, std::span<const double> x,
                                           InitRule init = InitRule::Omega);

// Minimum series length accepted by fit(): 20 observations per parameter.
std::size_t min_fit_length(std::size_t p, std::size_t q);

// Gaussian QML estimate of a GARCH(p, q) model. Multi-start quasi-Newton on
// log-parameters; the best feasible local minimum wins.
FitResult fit(std::span<const double> x, std::size_t p, std::size_t q,
              const FitOptions& options = {});

struct ModelDiagnostics {
  Eigen::MatrixXd U_hat;
  Eigen::VectorXd tau_hat;
  double kappa_hat = 0.0;
  Eigen::VectorXd delta_hat;
  bool U_singular = false;
  double ridge = 0.0;  // added to U_hat before inversion
  // tau' U^-1 u_t per observation: the weight of eps_t^2 - 1 in the
  // linearized effect of estimation on the residual scale.
  std::vector<double> tau_projection;
};

// u_t = sigma~_t^-2 d sigma~_t^2 / d theta at theta-hat; one row per t.
Eigen::MatrixXd score_vectors(const FitResult& fit, std::span<const double> x);

Eigen::MatrixXd estimate_U(const FitResult& fit, std::span<const double> x);
// tau-hat = mean(u_t) / 2.
Eigen::VectorXd estimate_tau(const FitResult& fit, std::span<const double> x);
// Fourth moment of residuals rescaled to unit second moment. Needs >= 10 values.
double estimate_kappa(std::span<const double> residuals);
// mean_t U^-1 u_t. Throws std::runtime_error if U is singular and ridge == 0.
Eigen::VectorXd estimate_delta(const FitResult& fit, std::span<const double> x, double ridge = 0.0);
// sum_l sqrt(n) (theta-hat_l - theta0_l) tau-hat_l. Simulation diagnostic only.
double compute_A(const FitResult& fit, std::span<const double> x, const GarchSpec& theta0);

bool is_singular(const Eigen::MatrixXd& U);

// All of the above in one pass, applying a ridge when U_hat is singular.
ModelDiagnostics diagnose(const FitResult& fit, std::span<const double> x);

}  // namespace garchrank
