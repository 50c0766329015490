#pragma once

#include "garchrank/covariance.hpp"
#include "garchrank/garch.hpp"
#include "garchrank/innovations.hpp"
#include "garchrank/qml.hpp"
#include "garchrank/ranks.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace garchrank {

using Orders = std::pair<std::size_t, std::size_t>;  // (p, q)

// How many directions of sqrt(N)(T - mu) enter the quadratic form.
enum class DofRule {
  // Every coordinate, chi-square with k degrees of freedom.
  Full,
  // Only the contrasts orthogonal to lambda, chi-square with k - 1. The
  // lambda-weighted sum of the statistics is a constant up to O(1/N), so
  // the dispersion matrix is singular along that direction.
  Contrast,
};

struct TestOptions {
  Score score = Score::Wilcoxon;
  double level = 0.05;
  FitOptions fit;
  SigmaForm sigma_form = SigmaForm::Complete;
  DofRule dof_rule = DofRule::Contrast;
  double lambda0 = 0.0;  // lower bound on every n_j / N; 0 disables
};

struct TestResult {
  std::vector<double> T;
  std::vector<double> mu;
  SigmaHat sigma_hat;
  double L_N = 0.0;
  double p_asymptotic = 1.0;
  std::size_t dof = 0;
  std::vector<FitResult> fits;
  std::vector<ModelDiagnostics> diagnostics;
  Score score = Score::Wilcoxon;
  double level = 0.05;
  bool reject = false;
  std::size_t N = 0;
};

// Fits every series, ranks the pooled residuals and forms the quadratic
// statistic. Fit failures are rethrown as FitError naming the group.
TestResult asymptotic_test(const std::vector<std::vector<double>>& samples,
                           const std::vector<Orders>& orders, const TestOptions& options = {});

// Statistic from residuals and diagnostics already in hand.
TestResult test_from_residuals(const std::vector<std::vector<double>>& residuals,
                               std::vector<ModelDiagnostics> diagnostics,
                               const TestOptions& options);

// Complete falls back to Influence when its trace is not positive; the
// returned form says which one was used.
SigmaHat assemble_with_fallback(const PluginCovariance& cov, SigmaForm form);

// N (T - mu)' Sigma^-1 (T - mu), restricted to lambda-orthogonal contrasts
// under DofRule::Contrast. Solves, never inverts.
double quadratic_statistic(const std::vector<double>& T, const std::vector<double>& mu,
                           const Eigen::MatrixXd& sigma, const std::vector<double>& lambda,
                           std::size_t N, DofRule rule);

struct BootstrapOptions {
  std::size_t B = 199;
  std::size_t n0 = 500;
  std::uint64_t seed = 0;
  // false reuses the observed Sigma-hat in every replicate (fast mode).
  bool recompute_sigma = true;
  // Draw bootstrap innovations from the standardized observed residuals
  // instead of N(0, 1).
  bool resample_residuals = false;
  // When nonzero, replicate statistics go through the m-cell quadrature
  // route instead of exact ranks.
  std::size_t quadrature_cells = 0;
  std::size_t workers = 1;
};

struct BootstrapResult {
  TestResult observed;
  std::vector<double> replicates;  // by replicate index, dropped ones removed
  double p_bootstrap = 1.0;
  double critical_value = 0.0;
  std::size_t B = 0;
  std::size_t n0 = 0;
  std::uint64_t seed = 0;
  std::size_t dropped = 0;
  bool reject = false;
  std::vector<std::string> warnings;
};

BootstrapResult bootstrap_test(const std::vector<std::vector<double>>& samples,
                               const std::vector<Orders>& orders,
                               const TestOptions& options = {},
                               const BootstrapOptions& boot = {});

// Both sides of the residual empirical process expansion
//   sqrt(n)(F-hat - F) = E_n + A x f(x) + xi
// on a grid, for a simulated series with known innovations and parameter.
struct DecompositionRecord {
  std::vector<double> grid;
  std::vector<double> B_hat;        // sqrt(n)(F-hat(x) - F(x))
  std::vector<double> E_n;          // sqrt(n)(F_n(x) - F(x)), true innovations
  std::vector<double> drift;        // A x f(x)
  std::vector<double> remainder;    // B_hat - E_n - drift
  double A = 0.0;
  double sup_remainder = 0.0;
};

// theta_hat defaults to the QML fit of x; pass theta0 to force no
// estimation effect.
DecompositionRecord decompose_diagnostic(std::span<const double> x,
                                         std::span<const double> innovations,
                                         const GarchSpec& theta0, const InnovationDist& dist,
                                         std::span<const double> grid,
                                         const std::optional<GarchSpec>& theta_hat = std::nullopt,
                                         const FitOptions& fit_options = {});

// Evenly spaced points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

std::string_view sigma_form_name(SigmaForm form);
SigmaForm parse_sigma_form(std::string_view name);
std::string_view dof_rule_name(DofRule rule);
DofRule parse_dof_rule(std::string_view name);

}  // namespace garchrank
