#pragma once

#include "garchrank/kde.hpp"
#include "garchrank/qml.hpp"
#include "garchrank/ranks.hpp"

#include <Eigen/Dense>

#include <vector>

namespace garchrank {

// Which correction terms enter the dispersion estimate.
enum class SigmaForm {
  // Original closed-form displays: K2 keeps only the i == i' measure pairs and the off-diagonal
  // estimation correction is L1 + L2.
  Published,
  // Full covariance of the linear representation, including the cross
  // terms the published displays drop. Sum_j lambda_j Sigma_{j.} = 0.
  Complete,
  // Same target as Complete, estimated per group as the empirical
  // covariance of plug-in influence values. Positive semidefinite by
  // construction, so near-cancelling terms (scale scores) cannot push it
  // negative.
  Influence,
};

struct SigmaComponents {
  Eigen::MatrixXd sigma1;      // rank (Chernoff-Savage) part, full k x k
  Eigen::VectorXd sigma2;      // estimation effect of the own group
  Eigen::VectorXd sigma3;      // estimation effect of the other groups
  Eigen::VectorXd gamma;       // K1 + K2
  Eigen::MatrixXd sigma2_off;  // estimation correction off the diagonal
};

struct SigmaHat {
  Eigen::MatrixXd matrix;
  double ridge_applied = 0.0;
  double min_eigenvalue = 0.0;  // before the ridge
  SigmaForm form = SigmaForm::Published;
  // Closed-form pieces; under Influence these are the Complete ones.
  SigmaComponents components;
};

// Plug-in estimate of the dispersion matrix of sqrt(N) (T - mu).
//
// Every F_j is replaced by the residual EDF, H_N by the pooled EDF, f_j by a
// Gaussian KDE with Silverman bandwidth and the model expectations by the
// sample averages in ModelDiagnostics. J' is evaluated at
// N/(N+1) H_N + 1/(2(N+1)) so VdW and Klotz stay finite.
//
// Double integrals over {x < y} against empirical measures are exact sums
// over ordered pairs of residuals; the product form of the kernels lets them
// run in O(k^2 N) with prefix sums.
class PluginCovariance {
 public:
  PluginCovariance(const PooledSample& pooled, std::vector<ModelDiagnostics> diagnostics,
                   Score score);

  std::size_t k() const { return k_; }
  std::size_t N() const { return N_; }
  const PooledSample& pooled() const { return pooled_; }

  // Clipped score derivative J'(N/(N+1) H + 1/(2(N+1))).
  double clipped_dJ(double H) const;

  // Gamma_j(x, y) = F_j(x) (1 - F_j(y)) J'(H_N(x)) J'(H_N(y)).
  double gamma_kernel(std::size_t j, double x, double y) const;
  // psi_i(u, v) = v f_i(v) J'(H_N(u)) J'(H_N(v)).
  double psi_kernel(std::size_t i, double u, double v) const;
  // h_i^l(v) = delta_i^l (1/n_i) sum_t (eps_it^2 - 1) I(eps_it <= v).
  double h_func(std::size_t i, std::size_t l, double v) const;

  // int int_{x<y} Gamma_c(x, y) dF_a(x) dF_b(y).
  double double_integral(std::size_t c, std::size_t a, std::size_t b) const;
  // int x f_c(x) J'(H_N(x)) dF_a(x).
  double density_integral(std::size_t c, std::size_t a) const;
  // int G_c(x) J'(H_N(x)) dF_a(x), with G_c(x) = (1/n_c) sum (eps^2 - 1) I(eps <= x).
  double moment_integral(std::size_t c, std::size_t a) const;

  Eigen::VectorXd omega_vec(std::size_t j) const;
  Eigen::VectorXd nu_vec(std::size_t i, std::size_t j) const;

  double sigma1_diag(std::size_t j) const;
  double sigma1_offdiag(std::size_t j, std::size_t jp) const;
  double sigma2_diag(std::size_t j) const;
  double sigma3_diag(std::size_t j) const;
  double k1(std::size_t j) const;
  double k2(std::size_t j, SigmaForm form = SigmaForm::Published) const;
  double gamma_diag(std::size_t j, SigmaForm form = SigmaForm::Published) const;
  double l1(std::size_t j, std::size_t jp) const;
  double l2(std::size_t j, std::size_t jp) const;
  double sigma2_offdiag(std::size_t j, std::size_t jp,
                        SigmaForm form = SigmaForm::Published) const;
  double sigma_offdiag(std::size_t j, std::size_t jp,
                       SigmaForm form = SigmaForm::Published) const;

  // Complete form evaluated group by group from the linear representation;
  // an independent route to assemble(SigmaForm::Complete).matrix before ridge.
  Eigen::MatrixXd complete_direct() const;

  // Empirical covariance of per-observation influence values, summed over
  // groups. Needs tau_projection in every ModelDiagnostics.
  Eigen::MatrixXd influence_matrix() const;

  SigmaHat assemble(SigmaForm form = SigmaForm::Published) const;

  const DensityEstimate& density(std::size_t c) const { return densities_[c]; }

 private:
  // Var(A_c) = (kappa_c - 1) tau_c' U_c^-1 tau_c.
  double var_A(std::size_t c) const;
  // tau_c' delta_c.
  double tau_delta(std::size_t c) const;
  double quad_form(std::size_t c, const Eigen::VectorXd& v) const;
  std::size_t idx3(std::size_t c, std::size_t a, std::size_t b) const {
    return (c * k_ + a) * k_ + b;
  }

  PooledSample pooled_;
  std::vector<ModelDiagnostics> diag_;
  Score score_;
  std::size_t k_;
  std::size_t N_;
  std::vector<double> lambda_;
  std::vector<double> n_;
  std::vector<DensityEstimate> densities_;
  std::vector<Edf> group_edf_;
  Edf pooled_edf_;
  // Per-group sorted residuals and prefix sums of (eps^2 - 1) for h_func.
  std::vector<std::vector<double>> group_sorted_;
  std::vector<std::vector<double>> group_moment_prefix_;

  std::vector<double> dbl_;      // k^3 table of double_integral
  std::vector<double> dens_;     // k^2 table of density_integral
  std::vector<double> moment_;   // k^2 table of moment_integral
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> u_solvers_;
};

// Symmetrize; if the smallest eigenvalue is <= 1e-10 trace, add
// (1e-8 trace + max(0, -min eigenvalue)) I. Throws if trace <= 0.
SigmaHat finalize_sigma(Eigen::MatrixXd matrix, SigmaForm form, SigmaComponents components);

}  // namespace garchrank
