// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Lines starting with "  info" carry context and never decide the outcome.
#include "garchrank/experiments.hpp"
#include "garchrank/garch.hpp"
#include "garchrank/ksample.hpp"
#include "garchrank/qml.hpp"
#include "garchrank/ranks.hpp"
#include "garchrank/special.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

using namespace garchrank;

namespace {

// Tolerances and budgets, fixed here and nowhere else.
constexpr double kRouteTol = 1e-12;
constexpr double kRouteSeconds = 10.0;
constexpr double kSizeLo = 0.02, kSizeHi = 0.09;
constexpr double kPowerMin = 0.60;
constexpr double kMonotoneSE = 2.0;
constexpr double kKsMax = 0.10;
constexpr double kCovRel = 0.25;
constexpr double kSlopeLo = -0.65, kSlopeHi = -0.35;
constexpr double kGradRel = 1e-5;
constexpr double kLyapDeterministic = 0.01;
constexpr double kInvNormTol = 1e-9;
constexpr double kChi2Tol = 1e-10;
constexpr double kNullMeanTol = 1e-6;

int failures = 0;

void verdict(int id, bool ok, const char* what, const std::string& detail) {
  std::printf("[C%d] %s  %s: %s\n", id, ok ? "PASS" : "FAIL", what, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void info(const std::string& s) {
  std::printf("  info  %s\n", s.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t workers() {
  return resolve_workers(std::max(1u, std::thread::hardware_concurrency()));
}

const StudyCell& cell(const StudyReport& r, const std::string& dgp, double phi, Score s) {
  for (const auto& c : r.cells) {
    if (c.dgp == dgp && std::abs(c.phi - phi) < 1e-12 && c.score == s) return c;
  }
  throw std::logic_error("missing study cell");
}

// ---------------------------------------------------------------------------

void route_equality() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240611);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t k = 2 + gen() % 4;
    std::vector<std::vector<double>> groups(k);
    std::student_t_distribution<double> td(3.0);
    for (auto& g : groups) {
      g.resize(5 + gen() % 196);
      for (auto& v : g) v = td(gen) * (1.0 + static_cast<double>(inst % 3));
    }
    PooledSample pooled(groups);
    for (Score s : {Score::Wilcoxon, Score::VanDerWaerden, Score::Mood, Score::Klotz}) {
      const auto a = linear_statistics(pooled, s);
      const auto b = linear_statistics_integral(pooled, s);
      for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, worst <= kRouteTol && secs < kRouteSeconds, "rank and integral routes agree",
          fmt("max |diff| %.2e (tol %.0e), %.2f s", worst, kRouteTol, secs));
}

void null_size() {
  StudyConfig c;
  c.phis = {0.0};
  c.ns = {100};
  c.scores = {Score::Wilcoxon, Score::VanDerWaerden};
  c.trials = 500;
  c.seed = 101;
  c.workers = workers();
  auto t0 = std::chrono::steady_clock::now();
  const auto r = run_study(c);
  const double wa = cell(r, "dgp1", 0.0, Score::Wilcoxon).reject_asymptotic;
  const double va = cell(r, "dgp1", 0.0, Score::VanDerWaerden).reject_asymptotic;
  const double t_asym = seconds_since(t0);

  StudyConfig b = c;
  b.scores = {Score::Wilcoxon};
  b.trials = 200;
  b.B = 199;
  b.seed = 102;
  t0 = std::chrono::steady_clock::now();
  const auto rb = run_study(b);
  const auto& bc = cell(rb, "dgp1", 0.0, Score::Wilcoxon);
  const double wb = bc.reject_bootstrap.value_or(-1.0);
  const double t_boot = seconds_since(t0);

  auto in = [](double v) { return v >= kSizeLo && v <= kSizeHi; };
  verdict(2, in(wa) && in(va) && in(wb), "null size at n = 100",
          fmt("asymptotic W %.3f, VdW %.3f (500 trials); bootstrap W %.3f (200 trials, B = 199); "
              "band [%.2f, %.2f]; %.0f s + %.0f s on %zu workers",
              wa, va, wb, kSizeLo, kSizeHi, t_asym, t_boot, c.workers));
  info(fmt("same 200 trials, asymptotic W %.3f; %zu bootstrap replicates dropped",
           bc.reject_asymptotic, bc.bootstrap_dropped));
}

void power_and_ordering() {
  StudyConfig c;
  c.dgps = {{"dgp1", dgp1()}, {"dgp2", dgp2()}};
  c.phis = {0.0, 1.0 / 9.0, 1.0 / 5.0, 1.0 / 3.0};
  c.ns = {100};
  c.scores = {Score::Wilcoxon, Score::VanDerWaerden, Score::Mood};
  c.trials = 300;
  c.seed = 103;
  c.workers = workers();
  const auto r = run_study(c);

  bool power_ok = true, monotone_ok = true;
  std::string detail;
  for (Score s : {Score::Wilcoxon, Score::VanDerWaerden}) {
    const auto& top = cell(r, "dgp1", c.phis.back(), s);
    power_ok = power_ok && top.reject_asymptotic >= kPowerMin;
    detail += fmt("%s:", std::string(score_name(s)).c_str());
    for (std::size_t i = 0; i < c.phis.size(); ++i) {
      const auto& cur = cell(r, "dgp1", c.phis[i], s);
      detail += fmt(" %.3f", cur.reject_asymptotic);
      if (i > 0) {
        const auto& prev = cell(r, "dgp1", c.phis[i - 1], s);
        const double se = std::hypot(prev.se_asymptotic, cur.se_asymptotic);
        monotone_ok = monotone_ok && cur.reject_asymptotic >= prev.reject_asymptotic - kMonotoneSE * se;
      }
    }
    detail += "; ";
  }
  verdict(3, power_ok && monotone_ok, "power at phi = 1/3 and monotone in phi",
          detail + fmt("need >= %.2f at phi = 1/3 (%s), monotone %s", kPowerMin,
                       power_ok ? "met" : "not met", monotone_ok ? "yes" : "no"));
  info(fmt("mood at phi = 0, 1/9, 1/5, 1/3: %.3f %.3f %.3f %.3f (scale score on the same trials)",
           cell(r, "dgp1", c.phis[0], Score::Mood).reject_asymptotic,
           cell(r, "dgp1", c.phis[1], Score::Mood).reject_asymptotic,
           cell(r, "dgp1", c.phis[2], Score::Mood).reject_asymptotic,
           cell(r, "dgp1", c.phis[3], Score::Mood).reject_asymptotic));

  double m1 = 0.0, m2 = 0.0;
  int cnt = 0;
  for (Score s : {Score::Wilcoxon, Score::VanDerWaerden}) {
    for (std::size_t i = 1; i < c.phis.size(); ++i) {
      m1 += cell(r, "dgp1", c.phis[i], s).reject_asymptotic;
      m2 += cell(r, "dgp2", c.phis[i], s).reject_asymptotic;
      ++cnt;
    }
  }
  m1 /= cnt;
  m2 /= cnt;
  verdict(4, m1 >= m2, "mean power dgp1 >= dgp2 over phi > 0",
          fmt("dgp1 %.4f, dgp2 %.4f (W and VdW, n = 100, 300 trials)", m1, m2));
  double q1 = 0.0, q2 = 0.0;
  for (std::size_t i = 1; i < c.phis.size(); ++i) {
    q1 += cell(r, "dgp1", c.phis[i], Score::Mood).reject_asymptotic / 3.0;
    q2 += cell(r, "dgp2", c.phis[i], Score::Mood).reject_asymptotic / 3.0;
  }
  info(fmt("mood mean power over phi > 0: dgp1 %.4f, dgp2 %.4f", q1, q2));
}

double ks_distance(std::vector<double> v, double dof) {
  std::sort(v.begin(), v.end());
  const boost::math::chi_squared chi(dof);
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = boost::math::cdf(chi, std::max(0.0, v[i]));
    d = std::max({d, (i + 1.0) / n - F, F - i / n});
  }
  return d;
}

void limit_law() {
  const std::size_t trials = 2000, n = 300, k = 3;
  struct Trial {
    bool ok = false;
    double L = 0.0;
    Eigen::VectorXd z;
    Eigen::MatrixXd sigma;
  };
  std::vector<Trial> out(trials);
  parallel_for(trials, workers(), [&](std::size_t t) {
    try {
      std::vector<std::vector<double>> xs;
      for (std::size_t j = 0; j < k; ++j) {
        RngStream rng(105, t, j);
        xs.push_back(simulate(dgp1(), InnovationDist::normal(), n, 500, rng).values);
      }
      const auto r = asymptotic_test(xs, std::vector<Orders>(k, {1, 1}));
      out[t].L = r.L_N;
      out[t].z.resize(k);
      for (std::size_t j = 0; j < k; ++j) out[t].z(j) = std::sqrt(double(r.N)) * (r.T[j] - r.mu[j]);
      out[t].sigma = r.sigma_hat.matrix;
      out[t].ok = true;
    } catch (const std::exception&) {
    }
  });

  std::vector<double> L500;
  std::size_t used = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd avg_sigma = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t t = 0; t < trials; ++t) {
    if (!out[t].ok) continue;
    if (L500.size() < 500) L500.push_back(out[t].L);
    mean += out[t].z;
    avg_sigma += out[t].sigma;
    ++used;
  }
  mean /= double(used);
  avg_sigma /= double(used);
  Eigen::MatrixXd mc = Eigen::MatrixXd::Zero(k, k);
  for (const auto& tr : out) {
    if (!tr.ok) continue;
    const Eigen::VectorXd d = tr.z - mean;
    mc += d * d.transpose();
  }
  mc /= double(used - 1);

  double worst = 0.0;
  std::string entries;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const double rel = std::abs(avg_sigma(a, b) - mc(a, b)) / std::abs(mc(a, b));
      worst = std::max(worst, rel);
      entries += fmt(" (%zu,%zu) %.4f/%.4f", a + 1, b + 1, mc(a, b), avg_sigma(a, b));
    }
  }
  const double ks3 = ks_distance(L500, 3.0);
  const double ks2 = ks_distance(L500, 2.0);
  verdict(5, ks3 <= kKsMax && worst <= kCovRel, "limit law of the statistic at n = 300",
          fmt("KS to chi2(3) %.3f (max %.2f) over 500 trials; covariance max rel err %.3f "
              "(max %.2f) over %zu trials",
              ks3, kKsMax, worst, kCovRel, used));
  info(fmt("KS to chi2(2) %.3f: the dispersion matrix has rank k - 1, lambda' (T - mu) is "
           "non-random, and the default statistic uses the k - 1 contrasts",
           ks2));
  info("MC / plug-in covariance (W):" + entries);
}

// Slope of log median ||theta_hat - theta0|| against log n, OLS over the grid.
double rate_slope(const GarchSpec& spec, const std::vector<std::size_t>& ns, std::size_t reps,
                  std::vector<double>& medians) {
  const Eigen::VectorXd truth = spec.theta();
  std::vector<double> lx, ly;
  for (std::size_t n : ns) {
    std::vector<double> err(reps, std::nan(""));
    parallel_for(reps, workers(), [&](std::size_t r) {
      RngStream rng(106, n, r);
      const auto s = simulate(spec, InnovationDist::normal(), n, 500, rng);
      try {
        err[r] = (fit(s.values, spec.p(), spec.q()).spec_hat.theta() - truth).norm();
      } catch (const FitError&) {
      }
    });
    err.erase(std::remove_if(err.begin(), err.end(), [](double v) { return std::isnan(v); }), err.end());
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    medians.push_back(err[err.size() / 2]);
    lx.push_back(std::log(double(n)));
    ly.push_back(std::log(medians.back()));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / lx.size();
    my += ly[i] / ly.size();
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

void qml_rate() {
  const std::vector<std::size_t> ns{250, 1000, 4000};
  std::vector<double> med;
  const double slope = rate_slope(dgp1(), ns, 100, med);
  verdict(6, slope >= kSlopeLo && slope <= kSlopeHi, "QML error rate at dgp1",
          fmt("slope %.3f in [%.2f, %.2f]; median errors %.4f %.4f %.4f", slope, kSlopeLo,
              kSlopeHi, med[0], med[1], med[2]));
  std::vector<double> med2;
  const double slope2 = rate_slope(dgp2(), ns, 100, med2);
  info(fmt("dgp2 slope %.3f, median errors %.4f %.4f %.4f. At dgp1 beta is weakly identified: "
           "its asymptotic sd is about 0.64 / sqrt(n / 250), so the bounded parameter space caps "
           "the error over this range of n",
           slope2, med2[0], med2[1], med2[2]));
}

void gradients() {
  std::mt19937_64 gen(107);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_vol = 0.0, worst_lik = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t p = 1 + inst % 2, q = 1 + (inst / 2) % 2;
    GarchSpec s;
    s.omega = 0.05 + 0.5 * u(gen);
    for (std::size_t i = 0; i < p; ++i) s.alpha.push_back(0.02 + 0.15 * u(gen));
    for (std::size_t i = 0; i < q; ++i) s.beta.push_back(0.1 + 0.6 * u(gen) / q);
    const InitRule init = inst % 3 == 0 ? InitRule::FirstSquared : InitRule::Omega;
    RngStream rng(107, inst);
    const auto x = simulate(s, InnovationDist::normal(), 200, 200, rng).values;
    const Eigen::VectorXd th = s.theta();
    const auto sig = volatility_recursion(s, x, init);
    const Eigen::MatrixXd g = volatility_gradient(s, x, sig, init);
    const auto lik = negative_quasi_loglik_gradient(s, x, init);
    Eigen::MatrixXd fd(g.rows(), g.cols());
    Eigen::VectorXd fdl(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      const double h = 1e-5 * std::max(0.1, std::abs(th(i)));
      Eigen::VectorXd up = th, dn = th;
      up(i) += h;
      dn(i) -= h;
      const auto su = GarchSpec::from_theta(up, p, q), sd = GarchSpec::from_theta(dn, p, q);
      const auto vu = volatility_recursion(su, x, init), vd = volatility_recursion(sd, x, init);
      for (std::size_t t = 0; t < x.size(); ++t) fd(t, i) = (vu[t] - vd[t]) / (2.0 * h);
      fdl(i) = (negative_quasi_loglik(su, x, init) - negative_quasi_loglik(sd, x, init)) / (2.0 * h);
    }
    worst_vol = std::max(worst_vol, (g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
    worst_lik = std::max(worst_lik, (lik.gradient - fdl).norm() / std::max(fdl.norm(), 1e-3));
  }
  verdict(7, worst_vol < kGradRel && worst_lik < kGradRel, "analytic gradients vs central differences",
          fmt("volatility %.2e, quasi-likelihood %.2e (limit %.0e, 20 instances)", worst_vol,
              worst_lik, kGradRel));
}

void lyapunov() {
  const auto d1 = lyapunov_exponent(dgp1(), InnovationDist::normal(), 5000, 40, 108);
  const auto d2 = lyapunov_exponent(dgp2(), InnovationDist::normal(), 5000, 40, 108);
  const auto hot = lyapunov_exponent(GarchSpec{0.1, {4.0}, {0.0}}, InnovationDist::normal(), 5000, 40, 108);
  const auto det = lyapunov_exponent(GarchSpec{0.1, {0.0}, {0.5}}, InnovationDist::normal(), 1000, 4, 108);
  // log 4 + E log eps^2 with E log eps^2 = -(Euler gamma + log 2).
  const double hot_exact = std::log(4.0) - 0.5772156649015329 - std::log(2.0);
  const bool ok = d1.value < 0.0 && d2.value < 0.0 && hot.value > 0.0 &&
                  std::abs(det.value - std::log(0.5)) < kLyapDeterministic;
  verdict(8, ok, "Lyapunov exponent signs",
          fmt("dgp1 %.4f, dgp2 %.4f, alpha = 4 %.4f (exact %.4f), beta = 0.5 %.6f (log 0.5 = %.6f)",
              d1.value, d2.value, hot.value, hot_exact, det.value, std::log(0.5)));
}

// Q(k/2, y) from Q(1/2, y) = erfc(sqrt y) or Q(1, y) = e^-y and
// Q(a + 1, y) = Q(a, y) + y^a e^-y / Gamma(a + 1).
long double chi2_survival_oracle(long double x, unsigned dof) {
  const long double y = x / 2.0L;
  long double a = (dof % 2 == 1) ? 0.5L : 1.0L;
  long double q = (dof % 2 == 1) ? std::erfc(std::sqrt(y)) : std::exp(-y);
  while (a < dof / 2.0L - 1e-9L) {
    q += std::exp(a * std::log(y) - y - std::lgamma(a + 1.0L));
    a += 1.0L;
  }
  return q;
}

void special_functions() {
  // 5e4 evenly spaced points plus 2.5e4 log-spaced points in each tail.
  std::vector<double> grid;
  for (int i = 0; i < 50000; ++i) grid.push_back((i + 0.5) / 50000.0);
  for (int i = 0; i < 25000; ++i) {
    const double t = std::pow(10.0, -15.0 + 13.0 * i / 24999.0);
    grid.push_back(t);
    grid.push_back(1.0 - t);
  }
  double worst_inv = 0.0;
  for (double u : grid) {
    const long double ref = -std::sqrt(2.0L) * boost::math::erfc_inv(2.0L * static_cast<long double>(u));
    worst_inv = std::max(worst_inv, std::abs(inverse_normal_cdf(u) - static_cast<double>(ref)));
  }

  double worst_chi = 0.0;
  for (unsigned dof = 1; dof <= 12; ++dof) {
    for (double x = 0.01; x <= 80.0; x += 0.01) {
      worst_chi = std::max(worst_chi, std::abs(chi2_survival(x, dof) -
                                               static_cast<double>(chi2_survival_oracle(x, dof))));
    }
  }

  boost::math::quadrature::tanh_sinh<double> ts;
  const double expect[4] = {0.5, 0.0, 1.0 / 12.0, 1.0};
  const Score scores[4] = {Score::Wilcoxon, Score::VanDerWaerden, Score::Mood, Score::Klotz};
  double worst_mean = 0.0;
  std::string means;
  for (int s = 0; s < 4; ++s) {
    const double q = ts.integrate([&](double u) { return score_J(scores[s], u); }, 0.0, 1.0);
    worst_mean = std::max({worst_mean, std::abs(q - expect[s]), std::abs(null_mean(scores[s]) - expect[s])});
    means += fmt(" %.8f", q);
  }
  verdict(9, worst_inv <= kInvNormTol && worst_chi <= kChi2Tol && worst_mean <= kNullMeanTol,
          "special functions",
          fmt("inverse normal %.2e on %zu points, chi2 survival %.2e, null means by quadrature%s "
              "(max err %.1e)",
              worst_inv, grid.size(), worst_chi, means.c_str(), worst_mean));
}

void remainder() {
  const auto sw = remainder_sweep(dgp1(), InnovationDist::normal(), {250, 1000}, 100, 110, workers());
  verdict(10, sw.median_sup[1] < sw.median_sup[0], "expansion remainder shrinks with n",
          fmt("median sup |xi| %.4f at n = 250, %.4f at n = 1000 (100 replicates)", sw.median_sup[0],
              sw.median_sup[1]));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::pair<const char*, void (*)()> steps[] = {
      {"route", route_equality}, {"size", null_size},      {"power", power_and_ordering},
      {"limit", limit_law},      {"rate", qml_rate},       {"gradients", gradients},
      {"lyapunov", lyapunov},    {"special", special_functions}, {"remainder", remainder},
  };
  for (const auto& [name, fn] : steps) {
    try {
      fn();
    } catch (const std::exception& e) {
      std::printf("[%s] FAIL  aborted: %s\n", name, e.what());
      ++failures;
    }
  }
  std::printf("acceptance: %d failing, %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
