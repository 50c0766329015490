#include "garchrank/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace garchrank {

PluginCovariance::PluginCovariance(const PooledSample& pooled,
                                   std::vector<ModelDiagnostics> diagnostics, Score score)
    : pooled_(pooled),
      diag_(std::move(diagnostics)),
      score_(score),
      k_(pooled.k()),
      N_(pooled.N()),
      lambda_(pooled.lambda()),
      pooled_edf_(pooled.values()) {
  if (k_ < 2) throw std::invalid_argument("PluginCovariance: need at least two samples");
  if (diag_.size() != k_) {
    throw std::invalid_argument("PluginCovariance: one ModelDiagnostics per sample required");
  }
  for (std::size_t j = 0; j < k_; ++j) {
    const auto& g = pooled_.groups()[j];
    if (g.size() < 2) {
      throw std::invalid_argument("PluginCovariance: sample " + std::to_string(j + 1) +
                                  " has fewer than two residuals");
    }
    const auto d = diag_[j].tau_hat.size();
    if (diag_[j].U_hat.rows() != d || diag_[j].delta_hat.size() != d) {
      throw std::invalid_argument("PluginCovariance: inconsistent diagnostic dimensions");
    }
    n_.push_back(static_cast<double>(g.size()));
    densities_.push_back(DensityEstimate::silverman(g));
    group_edf_.emplace_back(g);
    std::vector<double> s(g.begin(), g.end());
    std::sort(s.begin(), s.end());
    std::vector<double> prefix(s.size() + 1, 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) prefix[t + 1] = prefix[t] + (s[t] * s[t] - 1.0);
    group_sorted_.push_back(std::move(s));
    group_moment_prefix_.push_back(std::move(prefix));
    const Eigen::MatrixXd U =
        diag_[j].U_hat + diag_[j].ridge * Eigen::MatrixXd::Identity(d, d);
    u_solvers_.emplace_back(U);
  }

  // Per-position quantities along the pooled order.
  const auto& order = pooled_.order();
  const auto& labels = pooled_.labels();
  const auto& values = pooled_.values();
  std::vector<double> dj(N_), x(N_);
  std::vector<std::size_t> g(N_);
  for (std::size_t p = 0; p < N_; ++p) {
    x[p] = values[order[p]];
    g[p] = labels[order[p]];
    dj[p] = clipped_dJ(static_cast<double>(p + 1) / static_cast<double>(N_));
  }

  dbl_.assign(k_ * k_ * k_, 0.0);
  dens_.assign(k_ * k_, 0.0);
  moment_.assign(k_ * k_, 0.0);
  for (std::size_t c = 0; c < k_; ++c) {
    double count_c = 0.0;
    double moment_c = 0.0;
    std::vector<double> running(k_, 0.0);  // sum over earlier points of group a of F_c J' / n_a
    for (std::size_t p = 0; p < N_; ++p) {
      if (g[p] == c) {
        count_c += 1.0;
        moment_c += x[p] * x[p] - 1.0;
      }
      const double Fc = count_c / n_[c];
      const double Gc = moment_c / n_[c];
      const std::size_t b = g[p];
      const double right = (1.0 - Fc) * dj[p] / n_[b];
      for (std::size_t a = 0; a < k_; ++a) dbl_[idx3(c, a, b)] += right * running[a];
      running[b] += Fc * dj[p] / n_[b];
      dens_[c * k_ + b] += x[p] * densities_[c](x[p]) * dj[p] / n_[b];
      moment_[c * k_ + b] += Gc * dj[p] / n_[b];
    }
  }
}

double PluginCovariance::clipped_dJ(double H) const {
  const double Np1 = static_cast<double>(N_) + 1.0;
  const double u = static_cast<double>(N_) / Np1 * H + 0.5 / Np1;
  return score_dJ(score_, u);
}

double PluginCovariance::gamma_kernel(std::size_t j, double x, double y) const {
  const double Fx = group_edf_.at(j)(x);
  const double Fy = group_edf_.at(j)(y);
  return Fx * (1.0 - Fy) * clipped_dJ(pooled_edf_(x)) * clipped_dJ(pooled_edf_(y));
}

double PluginCovariance::psi_kernel(std::size_t i, double u, double v) const {
  return v * densities_.at(i)(v) * clipped_dJ(pooled_edf_(u)) * clipped_dJ(pooled_edf_(v));
}

double PluginCovariance::h_func(std::size_t i, std::size_t l, double v) const {
  const auto& s = group_sorted_.at(i);
  const auto cnt = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), v) - s.begin());
  const double G = group_moment_prefix_[i][cnt] / n_[i];
  return diag_[i].delta_hat(static_cast<Eigen::Index>(l)) * G;
}

double PluginCovariance::double_integral(std::size_t c, std::size_t a, std::size_t b) const {
  return dbl_.at(idx3(c, a, b));
}

double PluginCovariance::density_integral(std::size_t c, std::size_t a) const {
  return dens_.at(c * k_ + a);
}

double PluginCovariance::moment_integral(std::size_t c, std::size_t a) const {
  return moment_.at(c * k_ + a);
}

double PluginCovariance::quad_form(std::size_t c, const Eigen::VectorXd& v) const {
  return v.dot(u_solvers_[c].solve(v));
}

double PluginCovariance::var_A(std::size_t c) const {
  return (diag_[c].kappa_hat - 1.0) * quad_form(c, diag_[c].tau_hat);
}

double PluginCovariance::tau_delta(std::size_t c) const {
  return diag_[c].tau_hat.dot(diag_[c].delta_hat);
}

Eigen::VectorXd PluginCovariance::omega_vec(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i != j) s += lambda_[i] * density_integral(j, i);
  }
  return -s / std::sqrt(lambda_[j]) * diag_[j].tau_hat;
}

Eigen::VectorXd PluginCovariance::nu_vec(std::size_t i, std::size_t j) const {
  return std::sqrt(lambda_[i]) * density_integral(i, j) * diag_[i].tau_hat;
}

double PluginCovariance::sigma1_diag(std::size_t j) const {
  double first = 0.0;
  double second = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i == j) continue;
    first += lambda_[i] * double_integral(i, j, j);
    second += lambda_[i] * lambda_[i] * double_integral(j, i, i);
    for (std::size_t ip = 0; ip < k_; ++ip) {
      if (ip == j || ip == i) continue;
      cross += lambda_[i] * lambda_[ip] * (double_integral(j, i, ip) + double_integral(j, ip, i));
    }
  }
  return 2.0 * (first + second / lambda_[j]) + cross / lambda_[j];
}

double PluginCovariance::sigma1_offdiag(std::size_t j, std::size_t jp) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    s -= lambda_[i] * (double_integral(j, i, jp) + double_integral(j, jp, i));
    s -= lambda_[i] * (double_integral(jp, i, j) + double_integral(jp, j, i));
    s += lambda_[i] * (double_integral(i, j, jp) + double_integral(i, jp, j));
  }
  return s;
}

double PluginCovariance::sigma2_diag(std::size_t j) const {
  return (diag_[j].kappa_hat - 1.0) * quad_form(j, omega_vec(j));
}

double PluginCovariance::sigma3_diag(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i == j) continue;
    s += (diag_[i].kappa_hat - 1.0) * quad_form(i, nu_vec(i, j));
  }
  return s;
}

double PluginCovariance::k1(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i == j) continue;
    s += lambda_[i] * tau_delta(i) * moment_integral(i, j) * density_integral(i, j);
  }
  return 2.0 * s;
}

double PluginCovariance::k2(std::size_t j, SigmaForm form) const {
  if (form == SigmaForm::Published) {
    double s = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      if (i == j) continue;
      s += lambda_[i] * lambda_[i] * moment_integral(j, i) * density_integral(j, i);
    }
    return 2.0 / lambda_[j] * tau_delta(j) * s;
  }
  double gsum = 0.0;
  double isum = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    if (i == j) continue;
    gsum += lambda_[i] * moment_integral(j, i);
    isum += lambda_[i] * density_integral(j, i);
  }
  return 2.0 / lambda_[j] * tau_delta(j) * gsum * isum;
}

double PluginCovariance::gamma_diag(std::size_t j, SigmaForm form) const {
  return k1(j) + k2(j, form);
}

double PluginCovariance::l1(std::size_t j, std::size_t jp) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    s += lambda_[i] * (tau_delta(j) * moment_integral(j, i) * density_integral(j, jp) +
                       tau_delta(jp) * moment_integral(jp, i) * density_integral(jp, j));
  }
  return -s;
}

double PluginCovariance::l2(std::size_t j, std::size_t jp) const {
  double s = 0.0;
  for (std::size_t i = 0; i < k_; ++i) {
    s += lambda_[i] * (tau_delta(j) * density_integral(j, i) * moment_integral(j, jp) +
                       tau_delta(jp) * density_integral(jp, i) * moment_integral(jp, j));
  }
  return -s;
}

namespace {

// Weight of F_a in the signed measure M_{jc} through which group c's
// empirical process enters sqrt(N)(T_j - mu_j).
double measure_weight(const std::vector<double>& lambda, std::size_t j, std::size_t c,
                      std::size_t a) {
  if (c == j) return a == j ? 0.0 : -lambda[a] / std::sqrt(lambda[j]);
  return a == j ? std::sqrt(lambda[c]) : 0.0;
}

}  // namespace

double PluginCovariance::sigma2_offdiag(std::size_t j, std::size_t jp, SigmaForm form) const {
  if (form == SigmaForm::Published) return l1(j, jp) + l2(j, jp);
  double s = 0.0;
  for (std::size_t c = 0; c < k_; ++c) {
    double ij = 0.0, ijp = 0.0, gj = 0.0, gjp = 0.0;
    for (std::size_t a = 0; a < k_; ++a) {
      const double w = measure_weight(lambda_, j, c, a);
      const double wp = measure_weight(lambda_, jp, c, a);
      ij += w * density_integral(c, a);
      ijp += wp * density_integral(c, a);
      gj += w * moment_integral(c, a);
      gjp += wp * moment_integral(c, a);
    }
    s += var_A(c) * ij * ijp + tau_delta(c) * (ij * gjp + ijp * gj);
  }
  return s;
}

double PluginCovariance::sigma_offdiag(std::size_t j, std::size_t jp, SigmaForm form) const {
  return sigma1_offdiag(j, jp) + sigma2_offdiag(j, jp, form);
}

Eigen::MatrixXd PluginCovariance::complete_direct() const {
  const auto kk = static_cast<Eigen::Index>(k_);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(kk, kk);
  for (std::size_t c = 0; c < k_; ++c) {
    const double va = var_A(c);
    const double td = tau_delta(c);
    for (std::size_t j = 0; j < k_; ++j) {
      for (std::size_t jp = 0; jp < k_; ++jp) {
        double ww = 0.0, ij = 0.0, ijp = 0.0, gj = 0.0, gjp = 0.0;
        for (std::size_t a = 0; a < k_; ++a) {
          const double w = measure_weight(lambda_, j, c, a);
          const double wp = measure_weight(lambda_, jp, c, a);
          ij += w * density_integral(c, a);
          ijp += wp * density_integral(c, a);
          gj += w * moment_integral(c, a);
          gjp += wp * moment_integral(c, a);
          for (std::size_t b = 0; b < k_; ++b) {
            const double wb = measure_weight(lambda_, jp, c, b);
            if (w == 0.0 || wb == 0.0) continue;
            ww += w * wb * (double_integral(c, a, b) + double_integral(c, b, a));
          }
        }
        m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(jp)) +=
            ww + va * ij * ijp + td * (ij * gjp + ijp * gj);
      }
    }
  }
  return m;
}

Eigen::MatrixXd PluginCovariance::influence_matrix() const {
  const auto kk = static_cast<Eigen::Index>(k_);
  for (std::size_t c = 0; c < k_; ++c) {
    if (diag_[c].tau_projection.size() != pooled_.sizes()[c]) {
      throw std::invalid_argument("influence form needs one tau projection per residual");
    }
  }
  // Ic(j) = sum_a w(j, c, a) density_integral(c, a), one row per group c.
  Eigen::MatrixXd Ic = Eigen::MatrixXd::Zero(kk, kk);
  for (std::size_t c = 0; c < k_; ++c) {
    for (std::size_t j = 0; j < k_; ++j) {
      for (std::size_t a = 0; a < k_; ++a) {
        Ic(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) +=
            measure_weight(lambda_, j, c, a) * density_integral(c, a);
      }
    }
  }

  std::vector<std::size_t> offset(k_, 0);
  for (std::size_t c = 1; c < k_; ++c) offset[c] = offset[c - 1] + pooled_.sizes()[c - 1];

  // phi rows per group, filled walking the pooled order from the top:
  // suffix[a] = (1/n_a) sum of J' over group-a points at or above the
  // current position, i.e. int I(eps_t <= x) J'(H(x)) dF_a(x).
  std::vector<Eigen::MatrixXd> phi(k_);
  for (std::size_t c = 0; c < k_; ++c) {
    phi[c] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pooled_.sizes()[c]), kk);
  }
  const auto& order = pooled_.order();
  const auto& labels = pooled_.labels();
  const auto& values = pooled_.values();
  std::vector<double> suffix(k_, 0.0);
  for (std::size_t p = N_; p-- > 0;) {
    const std::size_t c = labels[order[p]];
    suffix[c] += clipped_dJ(static_cast<double>(p + 1) / static_cast<double>(N_)) / n_[c];
    const std::size_t t = order[p] - offset[c];
    const double e = values[order[p]];
    const double scale_part = (e * e - 1.0) * diag_[c].tau_projection[t];
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t j = 0; j < k_; ++j) {
      double r = 0.0;
      for (std::size_t a = 0; a < k_; ++a) r += measure_weight(lambda_, j, c, a) * suffix[a];
      phi[c](row, static_cast<Eigen::Index>(j)) =
          r + Ic(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) * scale_part;
    }
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(kk, kk);
  for (std::size_t c = 0; c < k_; ++c) {
    const Eigen::MatrixXd centered = phi[c].rowwise() - phi[c].colwise().mean();
    m += centered.transpose() * centered / n_[c];
  }
  return m;
}

SigmaHat PluginCovariance::assemble(SigmaForm form) const {
  const auto kk = static_cast<Eigen::Index>(k_);
  SigmaComponents comp;
  comp.sigma1 = Eigen::MatrixXd::Zero(kk, kk);
  comp.sigma2 = Eigen::VectorXd::Zero(kk);
  comp.sigma3 = Eigen::VectorXd::Zero(kk);
  comp.gamma = Eigen::VectorXd::Zero(kk);
  comp.sigma2_off = Eigen::MatrixXd::Zero(kk, kk);
  Eigen::MatrixXd m(kk, kk);
  for (std::size_t j = 0; j < k_; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    comp.sigma1(jj, jj) = sigma1_diag(j);
    comp.sigma2(jj) = sigma2_diag(j);
    comp.sigma3(jj) = sigma3_diag(j);
    comp.gamma(jj) = gamma_diag(j, form);
    m(jj, jj) = comp.sigma1(jj, jj) + comp.sigma2(jj) + comp.sigma3(jj) + comp.gamma(jj);
    for (std::size_t jp = j + 1; jp < k_; ++jp) {
      const auto pp = static_cast<Eigen::Index>(jp);
      comp.sigma1(jj, pp) = comp.sigma1(pp, jj) = sigma1_offdiag(j, jp);
      comp.sigma2_off(jj, pp) = comp.sigma2_off(pp, jj) = sigma2_offdiag(j, jp, form);
      m(jj, pp) = m(pp, jj) = comp.sigma1(jj, pp) + comp.sigma2_off(jj, pp);
    }
  }
  if (form == SigmaForm::Influence) m = influence_matrix();
  return finalize_sigma(std::move(m), form, std::move(comp));
}

SigmaHat finalize_sigma(Eigen::MatrixXd matrix, SigmaForm form, SigmaComponents components) {
  SigmaHat out;
  out.form = form;
  out.components = std::move(components);
  out.matrix = 0.5 * (matrix + matrix.transpose());
  const double tr = out.matrix.trace();
  if (!(tr > 0.0) || !out.matrix.allFinite()) {
    throw std::runtime_error("dispersion estimate has non-positive trace");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue <= 1e-10 * tr) {
    out.ridge_applied = 1e-8 * tr + std::max(0.0, -out.min_eigenvalue);
    out.matrix += out.ridge_applied *
                  Eigen::MatrixXd::Identity(out.matrix.rows(), out.matrix.cols());
  }
  return out;
}

}  // namespace garchrank
