#pragma once

#include "garchrank/innovations.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace garchrank {

// Raised when the volatility recursion leaves the representable range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// sigma^2 values above this abort the recursion.
inline constexpr double kDivergenceThreshold = 1e300;

// Pre-sample convention for X_0^2, ..., X_{1-p}^2 and sigma_0^2, ..., sigma_{1-q}^2.
enum class InitRule {
  Omega,         // all pre-sample values set to omega
  FirstSquared,  // all pre-sample values set to X_1^2
};

// GARCH(p, q) model with parameter vector theta = (omega, alpha_1..p, beta_1..q).
struct GarchSpec {
  double omega = 0.0;
  std::vector<double> alpha;
  std::vector<double> beta;

  std::size_t p() const { return alpha.size(); }
  std::size_t q() const { return beta.size(); }
  std::size_t dim() const { return 1 + alpha.size() + beta.size(); }

  Eigen::VectorXd theta() const;
  static GarchSpec from_theta(const Eigen::VectorXd& theta, std::size_t p, std::size_t q);

  double sum_alpha() const;
  double sum_beta() const;

  // Positivity, finiteness and sum(beta) < 1. Throws std::invalid_argument.
  void validate() const;
  bool is_valid() const noexcept;
  // alpha_p > 0 and beta_q > 0 (identifiability of the orders).
  bool orders_identified() const noexcept;
};

GarchSpec dgp1();
GarchSpec dgp2();

// sigma~_t^2 for t = 1..n. Throws std::invalid_argument on empty or non-finite
// input, DivergenceError past kDivergenceThreshold.
std::vector<double> volatility_recursion(const GarchSpec& spec, std::span<const double> x,
                                         InitRule init = InitRule::Omega);

// Row t holds d sigma~_t^2 / d theta. Pre-sample derivatives follow the
// initialization: under Omega every pre-sample value moves one-for-one with
// omega, under FirstSquared they are constants.
Eigen::MatrixXd volatility_gradient(const GarchSpec& spec, std::span<const double> x,
                                    std::span<const double> sigma2,
                                    InitRule init = InitRule::Omega);

struct SimulatedSample {
  std::vector<double> values;
  std::vector<double> volatilities;
  std::vector<double> innovations;
  std::uint64_t seed = 0;
  std::size_t warmup_discarded = 0;
};

// Runs n0 + n steps from omega-initialized state and keeps the last n.
SimulatedSample simulate(const GarchSpec& spec, const InnovationDist& dist, std::size_t n,
                         std::size_t n0, RngStream& rng);
SimulatedSample simulate(const GarchSpec& spec, const InnovationDist& dist, std::size_t n,
                         std::size_t n0, std::uint64_t seed);

struct LyapunovEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool scalar_path = false;
};

// Companion matrix of the squared process at innovation eps.
Eigen::MatrixXd companion_matrix(const GarchSpec& spec, double eps);

// Top Lyapunov exponent. GARCH(1,1) uses E log(alpha eps^2 + beta) directly;
// other orders average t^-1 log ||Delta_1 ... Delta_t|| over `reps` paths.
LyapunovEstimate lyapunov_exponent(const GarchSpec& spec, const InnovationDist& dist,
                                   std::size_t t_max, std::size_t reps, std::uint64_t seed);
LyapunovEstimate lyapunov_exponent_matrix(const GarchSpec& spec, const InnovationDist& dist,
                                          std::size_t t_max, std::size_t reps,
                                          std::uint64_t seed);

}  // namespace garchrank
