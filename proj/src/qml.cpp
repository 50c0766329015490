#include "garchrank/qml.hpp"

#include "garchrank/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace garchrank {

double negative_quasi_loglik(const GarchSpec& spec, std::span<const double> x, InitRule init) {
  const auto s2 = volatility_recursion(spec, x, init);
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) acc += std::log(s2[t]) + x[t] * x[t] / s2[t];
  return acc / static_cast<double>(x.size());
}

QuasiLoglik negative_quasi_loglik_gradient(const GarchSpec& spec, std::span<const double> x,
                                           InitRule init) {
  const auto s2 = volatility_recursion(spec, x, init);
  const Eigen::MatrixXd g = volatility_gradient(spec, x, s2, init);
  QuasiLoglik out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.dim()));
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double r = x[t] * x[t] / s2[t];
    acc += std::log(s2[t]) + r;
    out.gradient += ((1.0 - r) / s2[t]) * g.row(static_cast<Eigen::Index>(t)).transpose();
  }
  const double n = static_cast<double>(x.size());
  out.value = acc / n;
  out.gradient /= n;
  return out;
}

std::size_t min_fit_length(std::size_t p, std::size_t q) { return 20 * (p + q + 1); }

namespace {

constexpr double kBoundary = 1e-8;

// (sum alpha, sum beta) for each deterministic start.
std::pair<double, double> start_persistence(std::size_t k) {
  static constexpr std::array<std::pair<double, double>, 6> table = {
      {{0.10, 0.50}, {0.05, 0.85}, {0.20, 0.20}, {0.30, 0.30}, {0.05, 0.05}, {0.15, 0.75}}};
  return table[k % table.size()];
}

GarchSpec start_spec(double m2, std::size_t p, std::size_t q, std::size_t k) {
  auto [a_tot, b_tot] = start_persistence(k);
  if (p == 0) a_tot = 0.0;
  if (q == 0) b_tot = 0.0;
  GarchSpec s;
  s.omega = m2 * (1.0 - a_tot - b_tot);
  s.alpha.assign(p, p ? a_tot / static_cast<double>(p) : 0.0);
  s.beta.assign(q, q ? b_tot / static_cast<double>(q) : 0.0);
  return s;
}

FitResult finalize(GarchSpec spec, std::span<const double> x, const FitOptions& options,
                   const BfgsResult& opt) {
  FitResult r;
  for (double& a : spec.alpha) {
    if (a < kBoundary) {
      a = 0.0;
      r.at_boundary = true;
    }
  }
  for (double& b : spec.beta) {
    if (b < kBoundary) {
      b = 0.0;
      r.at_boundary = true;
    }
  }
  r.spec_hat = spec;
  r.init_rule = options.init_rule;
  r.sigma2 = volatility_recursion(spec, x, options.init_rule);
  r.residuals.resize(x.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    r.residuals[t] = x[t] / std::sqrt(r.sigma2[t]);
    acc += std::log(r.sigma2[t]) + x[t] * x[t] / r.sigma2[t];
  }
  r.objective = acc / static_cast<double>(x.size());
  r.converged = opt.converged;
  r.iterations = opt.iterations;
  r.gradient_norm = opt.gradient.lpNorm<Eigen::Infinity>();
  return r;
}

}  // namespace

FitResult fit(std::span<const double> x, std::size_t p, std::size_t q, const FitOptions& options) {
  if (x.size() < min_fit_length(p, q)) {
    throw std::invalid_argument("fit: need at least " + std::to_string(min_fit_length(p, q)) +
                                " observations for GARCH(" + std::to_string(p) + "," +
                                std::to_string(q) + ")");
  }
  double m2 = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("fit: series has non-finite values");
    m2 += v * v;
  }
  m2 /= static_cast<double>(x.size());
  if (!(m2 > 0.0)) throw std::invalid_argument("fit: series has zero second moment");

  GradientObjective objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    const Eigen::VectorXd theta = z.array().exp();
    const GarchSpec spec = GarchSpec::from_theta(theta, p, q);
    if (!spec.is_valid()) return std::numeric_limits<double>::infinity();
    try {
      const QuasiLoglik ql = negative_quasi_loglik_gradient(spec, x, options.init_rule);
      grad = theta.cwiseProduct(ql.gradient);
      return ql.value;
    } catch (const DivergenceError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  BfgsOptions bopt;
  bopt.gradient_tolerance = options.tolerance;
  bopt.max_iterations = options.max_iterations;

  std::optional<FitResult> best;
  const std::size_t starts = std::max<std::size_t>(options.starts, 1);
  for (std::size_t k = 0; k < starts; ++k) {
    const GarchSpec s0 = start_spec(m2, p, q, k);
    Eigen::VectorXd z0 = s0.theta().array().log();
    BfgsResult opt = minimize_bfgs(objective, z0, bopt);
    if (!std::isfinite(opt.value)) continue;
    const GarchSpec est =
        GarchSpec::from_theta(Eigen::VectorXd(opt.z.array().exp()), p, q);
    if (!est.is_valid()) continue;
    FitResult r;
    try {
      r = finalize(est, x, options, opt);
    } catch (const DivergenceError&) {
      continue;
    }
    // Prefer converged fits, then the lower objective.
    if (!best || (r.converged && !best->converged) ||
        (r.converged == best->converged && r.objective < best->objective)) {
      best = std::move(r);
    }
  }
  if (!best) {
    throw FitError("fit: every start diverged or left the feasible region", std::nullopt);
  }
  return *best;
}

Eigen::MatrixXd score_vectors(const FitResult& fit, std::span<const double> x) {
  if (fit.sigma2.size() != x.size()) {
    throw std::invalid_argument("score_vectors: fit and series lengths differ");
  }
  Eigen::MatrixXd g = volatility_gradient(fit.spec_hat, x, fit.sigma2, fit.init_rule);
  for (Eigen::Index t = 0; t < g.rows(); ++t) g.row(t) /= fit.sigma2[static_cast<std::size_t>(t)];
  return g;
}

Eigen::MatrixXd estimate_U(const FitResult& fit, std::span<const double> x) {
  const Eigen::MatrixXd u = score_vectors(fit, x);
  Eigen::MatrixXd U = u.transpose() * u / static_cast<double>(u.rows());
  return 0.5 * (U + U.transpose());
}

Eigen::VectorXd estimate_tau(const FitResult& fit, std::span<const double> x) {
  const Eigen::MatrixXd u = score_vectors(fit, x);
  return 0.5 * u.colwise().mean().transpose();
}

double estimate_kappa(std::span<const double> residuals) {
  if (residuals.size() < 10) throw std::invalid_argument("estimate_kappa: need >= 10 residuals");
  double m2 = 0.0;
  for (double e : residuals) m2 += e * e;
  m2 /= static_cast<double>(residuals.size());
  if (!(m2 > 0.0)) throw std::invalid_argument("estimate_kappa: residuals are all zero");
  double m4 = 0.0;
  for (double e : residuals) {
    const double z2 = e * e / m2;
    m4 += z2 * z2;
  }
  return m4 / static_cast<double>(residuals.size());
}

bool is_singular(const Eigen::MatrixXd& U) {
  const double tr = U.trace();
  if (!(tr > 0.0)) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(U, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() < 1e-12 * tr;
}

namespace {

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& U, const Eigen::VectorXd& b, double ridge) {
  const Eigen::MatrixXd A =
      U + ridge * Eigen::MatrixXd::Identity(U.rows(), U.cols());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  return ldlt.solve(b);
}

}  // namespace

Eigen::VectorXd estimate_delta(const FitResult& fit, std::span<const double> x, double ridge) {
  const Eigen::MatrixXd u = score_vectors(fit, x);
  Eigen::MatrixXd U = u.transpose() * u / static_cast<double>(u.rows());
  U = 0.5 * (U + U.transpose());
  if (ridge == 0.0 && is_singular(U)) {
    throw std::runtime_error("estimate_delta: U-hat is singular and no ridge was given");
  }
  return solve_spd(U, u.colwise().mean().transpose(), ridge);
}

double compute_A(const FitResult& fit, std::span<const double> x, const GarchSpec& theta0) {
  if (theta0.p() != fit.spec_hat.p() || theta0.q() != fit.spec_hat.q()) {
    throw std::invalid_argument("compute_A: theta0 orders differ from the fit");
  }
  const Eigen::VectorXd tau = estimate_tau(fit, x);
  const Eigen::VectorXd diff = fit.spec_hat.theta() - theta0.theta();
  return std::sqrt(static_cast<double>(x.size())) * diff.dot(tau);
}

ModelDiagnostics diagnose(const FitResult& fit, std::span<const double> x) {
  const Eigen::MatrixXd u = score_vectors(fit, x);
  const double n = static_cast<double>(u.rows());
  ModelDiagnostics d;
  d.U_hat = u.transpose() * u / n;
  d.U_hat = 0.5 * (d.U_hat + d.U_hat.transpose());
  const Eigen::VectorXd mean_u = u.colwise().mean().transpose();
  d.tau_hat = 0.5 * mean_u;
  d.kappa_hat = estimate_kappa(fit.residuals);
  d.U_singular = is_singular(d.U_hat);
  d.ridge = d.U_singular ? 1e-8 * std::max(d.U_hat.trace(), 1e-300) : 0.0;
  d.delta_hat = solve_spd(d.U_hat, mean_u, d.ridge);
  const Eigen::VectorXd w = solve_spd(d.U_hat, d.tau_hat, d.ridge);
  const Eigen::VectorXd proj = u * w;
  d.tau_projection.assign(proj.data(), proj.data() + proj.size());
  return d;
}

}  // namespace garchrank
