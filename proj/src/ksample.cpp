#include "garchrank/ksample.hpp"

#include "garchrank/special.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace garchrank {

namespace {

void check_inputs(const std::vector<std::vector<double>>& samples,
                  const std::vector<Orders>& orders) {
  if (samples.size() < 2) throw std::invalid_argument("need at least two samples");
  if (orders.size() != samples.size()) {
    throw std::invalid_argument("need one (p, q) order per sample");
  }
}

FitResult fit_group(std::span<const double> x, const Orders& ord, const FitOptions& opt,
                    std::size_t group) {
  try {
    return fit(x, ord.first, ord.second, opt);
  } catch (const FitError& e) {
    throw FitError("sample " + std::to_string(group + 1) + ": " + e.what(), e.best_partial());
  } catch (const std::exception& e) {
    throw FitError("sample " + std::to_string(group + 1) + ": " + e.what(), std::nullopt);
  }
}

std::vector<double> statistics(const PooledSample& pooled, Score score, std::size_t cells) {
  if (cells > 0) return linear_statistics_quadrature(pooled, score, cells);
  return linear_statistics(pooled, score);
}

// Innovations for one bootstrap path.
std::vector<double> draw_innovations(std::size_t count, RngStream& rng,
                                     const std::vector<double>* pool) {
  std::vector<double> e(count);
  if (pool == nullptr) {
    for (auto& v : e) v = rng.normal();
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool->size() - 1);
    for (auto& v : e) v = (*pool)[pick(rng.engine())];
  }
  return e;
}

std::vector<double> garch_path(const GarchSpec& spec, std::span<const double> eps,
                               std::size_t n0) {
  const std::size_t total = eps.size();
  std::vector<double> x2(total), s2(total), out;
  out.reserve(total - n0);
  for (std::size_t t = 0; t < total; ++t) {
    double s = spec.omega;
    for (std::size_t i = 1; i <= spec.p(); ++i) {
      s += spec.alpha[i - 1] * (t >= i ? x2[t - i] : spec.omega);
    }
    for (std::size_t i = 1; i <= spec.q(); ++i) {
      s += spec.beta[i - 1] * (t >= i ? s2[t - i] : spec.omega);
    }
    if (!(s <= kDivergenceThreshold)) throw DivergenceError("bootstrap path diverged");
    s2[t] = s;
    x2[t] = s * eps[t] * eps[t];
    if (t >= n0) out.push_back(std::sqrt(s) * eps[t]);
  }
  return out;
}

std::vector<double> standardized(const std::vector<double>& r) {
  double m = 0.0;
  for (double v : r) m += v;
  m /= static_cast<double>(r.size());
  double s2 = 0.0;
  for (double v : r) s2 += (v - m) * (v - m);
  const double s = std::sqrt(s2 / static_cast<double>(r.size()));
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - m) / s;
  return out;
}

}  // namespace

SigmaHat assemble_with_fallback(const PluginCovariance& cov, SigmaForm form) {
  if (form != SigmaForm::Complete) return cov.assemble(form);
  try {
    return cov.assemble(form);
  } catch (const std::runtime_error&) {
    // Scale scores can cancel below zero in the closed form.
    return cov.assemble(SigmaForm::Influence);
  }
}

double quadratic_statistic(const std::vector<double>& T, const std::vector<double>& mu,
                           const Eigen::MatrixXd& sigma, const std::vector<double>& lambda,
                           std::size_t N, DofRule rule) {
  const auto k = static_cast<Eigen::Index>(T.size());
  Eigen::VectorXd s(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    s(j) = T[static_cast<std::size_t>(j)] - mu[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd S = sigma;
  if (rule == DofRule::Contrast) {
    Eigen::VectorXd lam(k);
    for (Eigen::Index j = 0; j < k; ++j) lam(j) = lambda[static_cast<std::size_t>(j)];
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(lam);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
    const Eigen::MatrixXd basis = Q.rightCols(k - 1);
    s = basis.transpose() * s;
    S = basis.transpose() * sigma * basis;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::runtime_error("dispersion estimate is not positive definite");
  }
  const double L = static_cast<double>(N) * s.dot(ldlt.solve(s));
  if (!std::isfinite(L)) throw std::runtime_error("test statistic is not finite");
  return std::max(L, 0.0);
}

TestResult test_from_residuals(const std::vector<std::vector<double>>& residuals,
                               std::vector<ModelDiagnostics> diagnostics,
                               const TestOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw std::invalid_argument("level must lie in (0, 1)");
  }
  PooledSample pooled(residuals);
  if (options.lambda0 > 0.0) pooled.check_lambda_bound(options.lambda0);

  TestResult r;
  r.score = options.score;
  r.level = options.level;
  r.N = pooled.N();
  r.T = linear_statistics(pooled, options.score);
  r.mu.assign(pooled.k(), null_mean(options.score));
  PluginCovariance cov(pooled, diagnostics, options.score);
  r.sigma_hat = assemble_with_fallback(cov, options.sigma_form);
  r.diagnostics = std::move(diagnostics);
  r.L_N = quadratic_statistic(r.T, r.mu, r.sigma_hat.matrix, pooled.lambda(), r.N,
                              options.dof_rule);
  r.dof = options.dof_rule == DofRule::Full ? pooled.k() : pooled.k() - 1;
  r.p_asymptotic = chi2_survival(r.L_N, r.dof);
  r.reject = r.p_asymptotic < options.level;
  return r;
}

TestResult asymptotic_test(const std::vector<std::vector<double>>& samples,
                           const std::vector<Orders>& orders, const TestOptions& options) {
  check_inputs(samples, orders);
  std::vector<FitResult> fits;
  std::vector<std::vector<double>> residuals;
  std::vector<ModelDiagnostics> diags;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    fits.push_back(fit_group(samples[j], orders[j], options.fit, j));
    residuals.push_back(fits.back().residuals);
    diags.push_back(diagnose(fits.back(), samples[j]));
  }
  TestResult r = test_from_residuals(residuals, std::move(diags), options);
  r.fits = std::move(fits);
  return r;
}

BootstrapResult bootstrap_test(const std::vector<std::vector<double>>& samples,
                               const std::vector<Orders>& orders, const TestOptions& options,
                               const BootstrapOptions& boot) {
  if (boot.B < 99) throw std::invalid_argument("bootstrap needs B >= 99");
  BootstrapResult out;
  out.observed = asymptotic_test(samples, orders, options);
  out.B = boot.B;
  out.n0 = boot.n0;
  out.seed = boot.seed;

  const std::size_t k = samples.size();
  std::vector<std::vector<double>> pools;
  if (boot.resample_residuals) {
    for (const auto& f : out.observed.fits) pools.push_back(standardized(f.residuals));
  }

  // One replicate; returns NaN when both attempts fail.
  auto replicate = [&](std::size_t b) -> double {
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      try {
        std::vector<std::vector<double>> res(k);
        std::vector<ModelDiagnostics> diags;
        for (std::size_t j = 0; j < k; ++j) {
          RngStream rng(boot.seed, b, attempt * k + j);
          const std::size_t n = samples[j].size();
          const auto eps =
              draw_innovations(boot.n0 + n, rng, boot.resample_residuals ? &pools[j] : nullptr);
          const auto path = garch_path(out.observed.fits[j].spec_hat, eps, boot.n0);
          const FitResult f = fit(path, orders[j].first, orders[j].second, options.fit);
          res[j].assign(f.residuals.begin() + 1, f.residuals.end());
          if (boot.recompute_sigma) {
            diags.push_back(diagnose(f, path));
            auto& proj = diags.back().tau_projection;
            proj.erase(proj.begin());
          }
        }
        PooledSample pooled(res);
        const auto T = statistics(pooled, options.score, boot.quadrature_cells);
        Eigen::MatrixXd sigma;
        if (boot.recompute_sigma) {
          PluginCovariance cov(pooled, std::move(diags), options.score);
          sigma = assemble_with_fallback(cov, options.sigma_form).matrix;
        } else {
          sigma = out.observed.sigma_hat.matrix;
        }
        return quadratic_statistic(T, out.observed.mu, sigma, pooled.lambda(), pooled.N(),
                                   options.dof_rule);
      } catch (const std::exception&) {
        continue;
      }
    }
    return std::nan("");
  };

  std::vector<double> values(boot.B, std::nan(""));
  const std::size_t workers = std::max<std::size_t>(1, std::min(boot.workers, boot.B));
  if (workers == 1) {
    for (std::size_t b = 0; b < boot.B; ++b) values[b] = replicate(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < boot.B; b = next++) values[b] = replicate(b);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (double v : values) {
    if (std::isnan(v)) {
      ++out.dropped;
    } else {
      out.replicates.push_back(v);
    }
  }
  if (out.replicates.empty()) throw std::runtime_error("every bootstrap replicate failed");
  if (static_cast<double>(out.dropped) > 0.1 * static_cast<double>(boot.B)) {
    out.warnings.push_back(std::to_string(out.dropped) + " of " + std::to_string(boot.B) +
                           " bootstrap replicates dropped after failed refits");
  }

  const double L = out.observed.L_N;
  const std::size_t Bk = out.replicates.size();
  const auto exceed = static_cast<double>(
      std::count_if(out.replicates.begin(), out.replicates.end(), [L](double v) { return v >= L; }));
  out.p_bootstrap = (1.0 + exceed) / (static_cast<double>(Bk) + 1.0);
  std::vector<double> sorted = out.replicates;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - options.level) * (static_cast<double>(Bk) + 1.0) - 1e-9));
  out.critical_value = sorted[std::clamp<std::size_t>(rank, 1, Bk) - 1];
  out.reject = L > out.critical_value;
  return out;
}

DecompositionRecord decompose_diagnostic(std::span<const double> x,
                                         std::span<const double> innovations,
                                         const GarchSpec& theta0, const InnovationDist& dist,
                                         std::span<const double> grid,
                                         const std::optional<GarchSpec>& theta_hat,
                                         const FitOptions& fit_options) {
  if (x.size() != innovations.size()) {
    throw std::invalid_argument("decompose_diagnostic: series and innovations differ in length");
  }
  const GarchSpec est =
      theta_hat ? *theta_hat : fit(x, theta0.p(), theta0.q(), fit_options).spec_hat;
  const auto sigma2_hat = volatility_recursion(est, x, fit_options.init_rule);
  std::vector<double> resid(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) resid[t] = x[t] / std::sqrt(sigma2_hat[t]);

  FitResult at_truth;
  at_truth.spec_hat = theta0;
  at_truth.init_rule = fit_options.init_rule;
  at_truth.sigma2 = volatility_recursion(theta0, x, fit_options.init_rule);
  const Eigen::VectorXd tau = estimate_tau(at_truth, x);
  const double rn = std::sqrt(static_cast<double>(x.size()));

  DecompositionRecord rec;
  rec.A = rn * (est.theta() - theta0.theta()).dot(tau);
  const Edf F_hat(resid);
  const Edf F_n(innovations);
  for (double g : grid) {
    const double F = dist.cdf(g);
    const double b = rn * (F_hat(g) - F);
    const double e = rn * (F_n(g) - F);
    const double d = rec.A * g * dist.pdf(g);
    rec.grid.push_back(g);
    rec.B_hat.push_back(b);
    rec.E_n.push_back(e);
    rec.drift.push_back(d);
    rec.remainder.push_back(b - e - d);
    rec.sup_remainder = std::max(rec.sup_remainder, std::abs(b - e - d));
  }
  return rec;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points < 2) return {lo};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

std::string_view sigma_form_name(SigmaForm form) {
  switch (form) {
    case SigmaForm::Published:
      return "published";
    case SigmaForm::Complete:
      return "complete";
    case SigmaForm::Influence:
      return "influence";
  }
  return "unknown";
}

SigmaForm parse_sigma_form(std::string_view name) {
  if (name == "published") return SigmaForm::Published;
  if (name == "complete") return SigmaForm::Complete;
  if (name == "influence") return SigmaForm::Influence;
  throw std::invalid_argument("unknown dispersion form: " + std::string(name));
}

std::string_view dof_rule_name(DofRule rule) {
  return rule == DofRule::Full ? "full" : "contrast";
}

DofRule parse_dof_rule(std::string_view name) {
  if (name == "full") return DofRule::Full;
  if (name == "contrast") return DofRule::Contrast;
  throw std::invalid_argument("unknown dof rule: " + std::string(name));
}

}  // namespace garchrank
