#include "garchrank/garch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace garchrank {

Eigen::VectorXd GarchSpec::theta() const {
  Eigen::VectorXd t(dim());
  t(0) = omega;
  for (std::size_t i = 0; i < p(); ++i) t(1 + i) = alpha[i];
  for (std::size_t i = 0; i < q(); ++i) t(1 + p() + i) = beta[i];
  return t;
}

GarchSpec GarchSpec::from_theta(const Eigen::VectorXd& theta, std::size_t p, std::size_t q) {
  if (static_cast<std::size_t>(theta.size()) != 1 + p + q) {
    throw std::invalid_argument("theta length does not match the model orders");
  }
  GarchSpec s;
  s.omega = theta(0);
  s.alpha.resize(p);
  s.beta.resize(q);
  for (std::size_t i = 0; i < p; ++i) s.alpha[i] = theta(1 + i);
  for (std::size_t i = 0; i < q; ++i) s.beta[i] = theta(1 + p + i);
  return s;
}

double GarchSpec::sum_alpha() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
double GarchSpec::sum_beta() const { return std::accumulate(beta.begin(), beta.end(), 0.0); }

void GarchSpec::validate() const {
  if (!(std::isfinite(omega) && omega > 0.0)) {
    throw std::invalid_argument("GARCH omega must be finite and positive");
  }
  for (double a : alpha) {
    if (!(std::isfinite(a) && a >= 0.0)) {
      throw std::invalid_argument("GARCH alpha coefficients must be finite and >= 0");
    }
  }
  for (double b : beta) {
    if (!(std::isfinite(b) && b >= 0.0)) {
      throw std::invalid_argument("GARCH beta coefficients must be finite and >= 0");
    }
  }
  if (!(sum_beta() < 1.0)) {
    throw std::invalid_argument("GARCH beta coefficients must sum to less than 1");
  }
}

bool GarchSpec::is_valid() const noexcept {
  try {
    validate();
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

bool GarchSpec::orders_identified() const noexcept {
  return (alpha.empty() || alpha.back() > 0.0) && (beta.empty() || beta.back() > 0.0);
}

GarchSpec dgp1() { return GarchSpec{0.1, {0.1}, {0.1}}; }
GarchSpec dgp2() { return GarchSpec{0.5, {0.4}, {0.4}}; }

namespace {

double presample_value(const GarchSpec& spec, std::span<const double> x, InitRule init) {
  return init == InitRule::Omega ? spec.omega : x[0] * x[0];
}

void check_series(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("observation series is empty");
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("observation series has non-finite values");
  }
}

}  // namespace

std::vector<double> volatility_recursion(const GarchSpec& spec, std::span<const double> x,
                                         InitRule init) {
  spec.validate();
  check_series(x);
  const std::size_t n = x.size();
  const std::size_t p = spec.p();
  const std::size_t q = spec.q();
  const double pre = presample_value(spec, x, init);

  std::vector<double> sigma2(n);
  for (std::size_t t = 0; t < n; ++t) {
    double s = spec.omega;
    for (std::size_t i = 1; i <= p; ++i) {
      const double x2 = t >= i ? x[t - i] * x[t - i] : pre;
      s += spec.alpha[i - 1] * x2;
    }
    for (std::size_t i = 1; i <= q; ++i) {
      const double v = t >= i ? sigma2[t - i] : pre;
      s += spec.beta[i - 1] * v;
    }
    if (!(s <= kDivergenceThreshold)) {
      throw DivergenceError("volatility recursion diverged at t=" + std::to_string(t + 1));
    }
    sigma2[t] = s;
  }
  return sigma2;
}

Eigen::MatrixXd volatility_gradient(const GarchSpec& spec, std::span<const double> x,
                                    std::span<const double> sigma2, InitRule init) {
  if (x.size() != sigma2.size()) {
    throw std::invalid_argument("volatility_gradient: x and sigma2 lengths differ");
  }
  check_series(x);
  const std::size_t n = x.size();
  const std::size_t p = spec.p();
  const std::size_t q = spec.q();
  const std::size_t d = spec.dim();
  const double pre = presample_value(spec, x, init);
  const double pre_domega = init == InitRule::Omega ? 1.0 : 0.0;

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    // omega
    double go = 1.0;
    for (std::size_t i = 1; i <= p; ++i) {
      if (t < i) go += spec.alpha[i - 1] * pre_domega;
    }
    g(row, 0) = go;
    for (std::size_t i = 1; i <= p; ++i) {
      g(row, static_cast<Eigen::Index>(i)) = t >= i ? x[t - i] * x[t - i] : pre;
    }
    for (std::size_t i = 1; i <= q; ++i) {
      g(row, static_cast<Eigen::Index>(p + i)) = t >= i ? sigma2[t - i] : pre;
    }
    for (std::size_t i = 1; i <= q; ++i) {
      const double b = spec.beta[i - 1];
      if (t >= i) {
        g.row(row) += b * g.row(static_cast<Eigen::Index>(t - i));
      } else {
        g(row, 0) += b * pre_domega;
      }
    }
  }
  return g;
}

SimulatedSample simulate(const GarchSpec& spec, const InnovationDist& dist, std::size_t n,
                         std::size_t n0, RngStream& rng) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("simulate: n must be at least 1");
  const std::size_t total = n0 + n;
  const std::size_t p = spec.p();
  const std::size_t q = spec.q();

  std::vector<double> x2(total);
  std::vector<double> s2(total);
  std::vector<double> eps(total);
  for (std::size_t t = 0; t < total; ++t) {
    double s = spec.omega;
    for (std::size_t i = 1; i <= p; ++i) {
      s += spec.alpha[i - 1] * (t >= i ? x2[t - i] : spec.omega);
    }
    for (std::size_t i = 1; i <= q; ++i) {
      s += spec.beta[i - 1] * (t >= i ? s2[t - i] : spec.omega);
    }
    if (!(s <= kDivergenceThreshold)) {
      throw DivergenceError("simulated volatility diverged at step " + std::to_string(t + 1));
    }
    const double e = dist.sample(rng);
    s2[t] = s;
    eps[t] = e;
    x2[t] = s * e * e;
  }

  SimulatedSample out;
  out.seed = rng.seed();
  out.warmup_discarded = n0;
  out.values.resize(n);
  out.volatilities.assign(s2.begin() + static_cast<std::ptrdiff_t>(n0), s2.end());
  out.innovations.assign(eps.begin() + static_cast<std::ptrdiff_t>(n0), eps.end());
  for (std::size_t t = 0; t < n; ++t) {
    out.values[t] = std::sqrt(out.volatilities[t]) * out.innovations[t];
  }
  return out;
}

SimulatedSample simulate(const GarchSpec& spec, const InnovationDist& dist, std::size_t n,
                         std::size_t n0, std::uint64_t seed) {
  RngStream rng(seed);
  return simulate(spec, dist, n, n0, rng);
}

Eigen::MatrixXd companion_matrix(const GarchSpec& spec, double eps) {
  const auto p = static_cast<Eigen::Index>(spec.p());
  const auto q = static_cast<Eigen::Index>(spec.q());
  const double e2 = eps * eps;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p + q, p + q);
  if (p == 0) {
    // Deterministic variance recursion: beta row plus shift.
    for (Eigen::Index i = 0; i < q; ++i) m(0, i) = spec.beta[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < q; ++i) m(i, i - 1) = 1.0;
    return m;
  }
  // Row 0: (alpha, beta) * eps^2; rows 1..p-1 shift the squared observations;
  // row p: (alpha, beta); rows p+1..p+q-1 shift the variances.
  for (Eigen::Index i = 0; i < p; ++i) m(0, i) = spec.alpha[static_cast<std::size_t>(i)] * e2;
  for (Eigen::Index i = 0; i < q; ++i) m(0, p + i) = spec.beta[static_cast<std::size_t>(i)] * e2;
  for (Eigen::Index i = 1; i < p; ++i) m(i, i - 1) = 1.0;
  if (q > 0) {
    for (Eigen::Index i = 0; i < p; ++i) m(p, i) = spec.alpha[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < q; ++i) m(p, p + i) = spec.beta[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < q; ++i) m(p + i, p + i - 1) = 1.0;
  }
  return m;
}

namespace {

LyapunovEstimate summarize(const std::vector<double>& draws, bool scalar) {
  const double n = static_cast<double>(draws.size());
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  LyapunovEstimate est;
  est.value = mean;
  est.std_error = draws.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  est.scalar_path = scalar;
  return est;
}

}  // namespace

LyapunovEstimate lyapunov_exponent_matrix(const GarchSpec& spec, const InnovationDist& dist,
                                          std::size_t t_max, std::size_t reps,
                                          std::uint64_t seed) {
  spec.validate();
  if (t_max < 100) throw std::invalid_argument("lyapunov_exponent: t_max must be >= 100");
  if (reps == 0) throw std::invalid_argument("lyapunov_exponent: reps must be >= 1");
  if (spec.p() + spec.q() == 0) {
    return {-std::numeric_limits<double>::infinity(), 0.0, false};
  }
  constexpr std::size_t kRenormEvery = 50;
  std::vector<double> draws(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(seed, r);
    const auto dim = static_cast<Eigen::Index>(spec.p() + spec.q());
    Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(dim, dim);
    double log_norm = 0.0;
    for (std::size_t t = 1; t <= t_max; ++t) {
      prod = prod * companion_matrix(spec, dist.sample(rng));
      if (t % kRenormEvery == 0 || t == t_max) {
        const double nrm = prod.norm();
        if (nrm == 0.0) {
          log_norm = -std::numeric_limits<double>::infinity();
          break;
        }
        log_norm += std::log(nrm);
        prod /= nrm;
      }
    }
    draws[r] = log_norm / static_cast<double>(t_max);
  }
  return summarize(draws, false);
}

LyapunovEstimate lyapunov_exponent(const GarchSpec& spec, const InnovationDist& dist,
                                   std::size_t t_max, std::size_t reps, std::uint64_t seed) {
  spec.validate();
  if (spec.p() != 1 || spec.q() != 1) {
    return lyapunov_exponent_matrix(spec, dist, t_max, reps, seed);
  }
  if (t_max < 100) throw std::invalid_argument("lyapunov_exponent: t_max must be >= 100");
  if (reps == 0) throw std::invalid_argument("lyapunov_exponent: reps must be >= 1");
  const double a = spec.alpha[0];
  const double b = spec.beta[0];
  std::vector<double> draws(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    RngStream rng(seed, r);
    double acc = 0.0;
    for (std::size_t t = 0; t < t_max; ++t) {
      const double e = dist.sample(rng);
      acc += std::log(a * e * e + b);
    }
    draws[r] = acc / static_cast<double>(t_max);
  }
  return summarize(draws, true);
}

}  // namespace garchrank
