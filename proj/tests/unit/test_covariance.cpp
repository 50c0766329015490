#include "garchrank/covariance.hpp"
#include "garchrank/garch.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace garchrank;

namespace {

const Score kScores[] = {Score::Wilcoxon, Score::VanDerWaerden, Score::Mood, Score::Klotz};

struct Fixture {
  std::vector<std::vector<double>> residuals;
  std::vector<ModelDiagnostics> diags;
};

Fixture fitted(std::size_t k, std::size_t n, std::uint64_t seed) {
  Fixture f;
  for (std::size_t j = 0; j < k; ++j) {
    RngStream rng(seed, j);
    const auto s = simulate(dgp1(), InnovationDist::normal(), n, 200, rng);
    const auto fr = fit(s.values, 1, 1);
    f.residuals.push_back(fr.residuals);
    f.diags.push_back(diagnose(fr, s.values));
  }
  return f;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(Covariance, DoubleIntegralsMatchBruteForce) {
  const auto fx = fitted(3, 70, 3);
  PooledSample pooled(fx.residuals);
  for (Score s : kScores) {
    PluginCovariance cov(pooled, fx.diags, s);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
          double brute = 0.0;
          for (double x : fx.residuals[a]) {
            for (double y : fx.residuals[b]) {
              if (x < y) brute += cov.gamma_kernel(c, x, y);
            }
          }
          brute /= static_cast<double>(fx.residuals[a].size() * fx.residuals[b].size());
          EXPECT_NEAR(cov.double_integral(c, a, b), brute, 1e-12 * std::max(1.0, std::abs(brute)))
              << score_name(s) << ' ' << c << a << b;
        }
      }
    }
  }
}

TEST(Covariance, SingleIntegralsMatchDirectSums) {
  const auto fx = fitted(3, 70, 4);
  PooledSample pooled(fx.residuals);
  PooledEdf H(pooled);
  for (Score s : kScores) {
    PluginCovariance cov(pooled, fx.diags, s);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t a = 0; a < 3; ++a) {
        double dens = 0.0, mom = 0.0;
        for (double x : fx.residuals[a]) {
          const double dj = cov.clipped_dJ(H(x));
          dens += x * cov.density(c)(x) * dj;
          mom += cov.h_func(c, 0, x) / fx.diags[c].delta_hat(0) * dj;
        }
        const double na = static_cast<double>(fx.residuals[a].size());
        EXPECT_NEAR(cov.density_integral(c, a), dens / na, 1e-12 * std::max(1.0, std::abs(dens / na)));
        EXPECT_NEAR(cov.moment_integral(c, a), mom / na, 1e-12 * std::max(1.0, std::abs(mom / na)));
      }
    }
  }
}

TEST(Covariance, GammaKernelCollapses) {
  const auto fx = fitted(2, 70, 5);
  PooledSample pooled(fx.residuals);
  PluginCovariance cov(pooled, fx.diags, Score::Wilcoxon);
  EXPECT_EQ(cov.gamma_kernel(0, -100.0, 0.0), 0.0);
  Edf F(fx.residuals[1]);
  for (double x : {-1.0, 0.0, 0.4}) {
    const double y = x + 0.7;
    EXPECT_DOUBLE_EQ(cov.gamma_kernel(1, x, y), F(x) * (1.0 - F(y)));
  }
  // The clipped argument at the i-th pooled point is (i + 1/2) / (N + 1).
  PluginCovariance vdw(pooled, fx.diags, Score::VanDerWaerden);
  const double N = static_cast<double>(pooled.N());
  EXPECT_NEAR(vdw.clipped_dJ(1.0), score_dJ(Score::VanDerWaerden, (N + 0.5) / (N + 1.0)), 1e-12 * vdw.clipped_dJ(1.0));
}

TEST(Covariance, HFunctionLimits) {
  const auto fx = fitted(2, 80, 6);
  PooledSample pooled(fx.residuals);
  PluginCovariance cov(pooled, fx.diags, Score::Mood);
  EXPECT_EQ(cov.h_func(0, 1, -1e9), 0.0);
  double m2 = 0.0;
  for (double e : fx.residuals[0]) m2 += e * e;
  m2 /= fx.residuals[0].size();
  EXPECT_NEAR(cov.h_func(0, 1, 1e9), fx.diags[0].delta_hat(1) * (m2 - 1.0), 1e-12);
  EXPECT_LT(std::abs(m2 - 1.0), 0.1);
}

TEST(Covariance, ComponentsSumToAssembledMatrix) {
  const auto fx = fitted(3, 120, 7);
  PooledSample pooled(fx.residuals);
  for (Score s : kScores) {
    PluginCovariance cov(pooled, fx.diags, s);
    const Eigen::MatrixXd direct = cov.complete_direct();
    for (std::size_t j = 0; j < 3; ++j) {
      const double diag = cov.sigma1_diag(j) + cov.sigma2_diag(j) + cov.sigma3_diag(j) +
                          cov.gamma_diag(j, SigmaForm::Complete);
      EXPECT_NEAR(diag, direct(j, j), 1e-10 * std::max(1.0, std::abs(diag))) << score_name(s);
      for (std::size_t jp = 0; jp < 3; ++jp) {
        if (jp == j) continue;
        const double off = cov.sigma_offdiag(j, jp, SigmaForm::Complete);
        EXPECT_NEAR(off, direct(j, jp), 1e-10 * std::max(1.0, std::abs(off))) << score_name(s);
      }
    }
  }
}

TEST(Covariance, PublishedAndCompleteAgreeForTwoSamples) {
  const auto fx = fitted(2, 150, 8);
  PooledSample pooled(fx.residuals);
  for (Score s : kScores) {
    PluginCovariance cov(pooled, fx.diags, s);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(cov.k2(j, SigmaForm::Published), cov.k2(j, SigmaForm::Complete),
                  1e-12 * std::max(1.0, std::abs(cov.k2(j, SigmaForm::Complete))));
    }
    // With two samples lambda_0 T_0 + lambda_1 T_1 is fixed, which pins the
    // off-diagonal entry. The published L1 + L2 correction does not meet it.
    const double l0 = pooled.lambda()[0], l1 = pooled.lambda()[1];
    const double d0 = cov.sigma1_diag(0) + cov.sigma2_diag(0) + cov.sigma3_diag(0) +
                      cov.gamma_diag(0, SigmaForm::Complete);
    const double com = cov.sigma_offdiag(0, 1, SigmaForm::Complete);
    EXPECT_NEAR(com, -l0 / l1 * d0, 1e-12 * std::max(1.0, std::abs(d0))) << score_name(s);
  }
}

TEST(Covariance, LambdaIsNullVectorOfCompleteForms) {
  const auto fx = fitted(3, 90, 9);
  std::vector<std::vector<double>> res = fx.residuals;
  res[1].resize(70);
  auto diags = fx.diags;
  diags[1].tau_projection.resize(70);
  PooledSample pooled(res);
  Eigen::VectorXd lam(3);
  for (int j = 0; j < 3; ++j) lam(j) = pooled.lambda()[j];
  for (Score s : kScores) {
    PluginCovariance cov(pooled, diags, s);
    const Eigen::MatrixXd c = cov.complete_direct();
    const Eigen::MatrixXd inf = cov.influence_matrix();
    EXPECT_LE((c * lam).norm(), 1e-10 * c.norm()) << score_name(s);
    EXPECT_LE((inf * lam).norm(), 1e-10 * inf.norm()) << score_name(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inf);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * inf.trace());
  }
}

TEST(Covariance, AssembledMatrixIsSymmetricPositiveDefinite) {
  const auto fx = fitted(3, 200, 10);
  PooledSample pooled(fx.residuals);
  for (Score s : {Score::Wilcoxon, Score::VanDerWaerden, Score::Mood}) {
    PluginCovariance cov(pooled, fx.diags, s);
    for (SigmaForm form : {SigmaForm::Published, SigmaForm::Complete, SigmaForm::Influence}) {
      const SigmaHat h = cov.assemble(form);
      EXPECT_LE((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix);
      EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
      for (int j = 0; j < 3; ++j) EXPECT_GT(h.matrix(j, j), 0.0);
    }
    // The complete forms are singular along lambda, so the ridge engages.
    EXPECT_GT(cov.assemble(SigmaForm::Complete).ridge_applied, 0.0);
  }
}

TEST(Covariance, ClassicalWilcoxonConstants) {
  // Without estimation effects sigma1 is the classical rank variance:
  // N Var(T_j) -> (1 - lambda_j) / (12 lambda_j), N Cov(T_j, T_j') -> -1/12.
  RngStream rng(11);
  std::vector<std::vector<double>> g(3, std::vector<double>(400));
  for (auto& grp : g)
    for (auto& v : grp) v = rng.uniform();
  const auto fx = fitted(3, 400, 12);
  PooledSample pooled(g);
  PluginCovariance cov(pooled, fx.diags, Score::Wilcoxon);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(cov.sigma1_diag(j), 1.0 / 6.0, 0.01);
    for (std::size_t jp = j + 1; jp < 3; ++jp) EXPECT_NEAR(cov.sigma1_offdiag(j, jp), -1.0 / 12.0, 0.01);
  }
}

TEST(Covariance, SwappingOtherGroupsLeavesDiagonalUnchanged) {
  const auto fx = fitted(3, 100, 13);
  PooledSample a(fx.residuals);
  PooledSample b({fx.residuals[0], fx.residuals[2], fx.residuals[1]});
  PluginCovariance ca(a, fx.diags, Score::VanDerWaerden);
  PluginCovariance cb(b, {fx.diags[0], fx.diags[2], fx.diags[1]}, Score::VanDerWaerden);
  EXPECT_NEAR(ca.sigma1_diag(0), cb.sigma1_diag(0), 1e-12);
  EXPECT_NEAR(ca.sigma1_offdiag(1, 2), cb.sigma1_offdiag(2, 1), 1e-12);
}

TEST(Covariance, PermutationWithinGroups) {
  const auto fx = fitted(3, 80, 14);
  auto res = fx.residuals;
  auto diags = fx.diags;
  std::vector<std::size_t> perm(80);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t t = 0; t < 80; ++t) {
      res[j][t] = fx.residuals[j][perm[t]];
      diags[j].tau_projection[t] = fx.diags[j].tau_projection[perm[t]];
    }
  }
  PluginCovariance c1(PooledSample(fx.residuals), fx.diags, Score::Mood);
  PluginCovariance c2(PooledSample(res), diags, Score::Mood);
  EXPECT_LE((c1.complete_direct() - c2.complete_direct()).norm(), 1e-12);
  EXPECT_LE((c1.influence_matrix() - c2.influence_matrix()).norm(), 1e-12);
}

TEST(Covariance, ZeroDeltaRemovesGamma) {
  auto fx = fitted(3, 90, 15);
  for (auto& d : fx.diags) d.delta_hat.setZero();
  PluginCovariance cov(PooledSample(fx.residuals), fx.diags, Score::VanDerWaerden);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(cov.gamma_diag(j, SigmaForm::Published), 0.0);
    EXPECT_EQ(cov.gamma_diag(j, SigmaForm::Complete), 0.0);
  }
  EXPECT_EQ(cov.l1(0, 1) + cov.l2(0, 1), 0.0);
}

TEST(Covariance, SymmetricResidualsGiveZeroDensityTerm) {
  auto fx = fitted(3, 70, 16);
  for (auto& r : fx.residuals) {
    const std::size_t n = r.size();
    for (std::size_t t = 0; t < n; ++t) r.push_back(-r[t]);
  }
  for (auto& d : fx.diags) {
    const auto p = d.tau_projection;
    d.tau_projection.insert(d.tau_projection.end(), p.begin(), p.end());
  }
  PluginCovariance cov(PooledSample(fx.residuals), fx.diags, Score::Wilcoxon);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(cov.density_integral(c, a), 0.0, 1e-14);
  EXPECT_NEAR(cov.omega_vec(0).norm(), 0.0, 1e-13);
  EXPECT_NEAR(cov.sigma2_diag(1), 0.0, 1e-20);
}

TEST(Covariance, RankPartIsScaleInvariant) {
  auto fx = fitted(3, 70, 17);
  auto scaled = fx.residuals;
  for (auto& r : scaled)
    for (auto& v : r) v *= 2.5;
  PluginCovariance a(PooledSample(fx.residuals), fx.diags, Score::Klotz);
  PluginCovariance b(PooledSample(scaled), fx.diags, Score::Klotz);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.sigma1_diag(j), b.sigma1_diag(j), 1e-12 * a.sigma1_diag(j));
  // x f(x) is scale free when f is re-estimated on the scaled data.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t l = 0; l < 3; ++l)
      EXPECT_NEAR(a.density_integral(c, l), b.density_integral(c, l), 1e-10 * std::max(1.0, std::abs(a.density_integral(c, l))));
}

TEST(Covariance, OmegaAndNuVectors) {
  const auto fx = fitted(2, 100, 18);
  PooledSample pooled(fx.residuals);
  PluginCovariance cov(pooled, fx.diags, Score::VanDerWaerden);
  const double l0 = pooled.lambda()[0], l1 = pooled.lambda()[1];
  const Eigen::VectorXd w = cov.omega_vec(0);
  const Eigen::VectorXd expect = -l1 * cov.density_integral(0, 1) / std::sqrt(l0) * fx.diags[0].tau_hat;
  EXPECT_LE((w - expect).norm(), 1e-14);
  EXPECT_LE((cov.nu_vec(1, 0) - std::sqrt(l1) * cov.density_integral(1, 0) * fx.diags[1].tau_hat).norm(), 1e-14);
}

TEST(Covariance, RidgePolicy) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;
  const SigmaHat h = finalize_sigma(m, SigmaForm::Complete, {});
  EXPECT_NEAR(h.ridge_applied, 2e-8, 1e-12);
  Eigen::MatrixXd neg(2, 2);
  neg << 1.0, 0.0, 0.0, -0.5;
  const SigmaHat hn = finalize_sigma(neg, SigmaForm::Complete, {});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hn.matrix);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_EQ(finalize_sigma(Eigen::Matrix2d::Identity(), SigmaForm::Complete, {}).ridge_applied, 0.0);
  EXPECT_THROW(finalize_sigma(-Eigen::Matrix2d::Identity(), SigmaForm::Complete, {}), std::runtime_error);
}

TEST(Covariance, Errors) {
  const auto fx = fitted(2, 70, 19);
  EXPECT_THROW(PluginCovariance(PooledSample({fx.residuals[0], {0.3}}), fx.diags, Score::Wilcoxon),
               std::invalid_argument);
  EXPECT_THROW(PluginCovariance(PooledSample(fx.residuals), {fx.diags[0]}, Score::Wilcoxon),
               std::invalid_argument);
  EXPECT_THROW(PluginCovariance(PooledSample({fx.residuals[0]}), {fx.diags[0]}, Score::Wilcoxon),
               std::invalid_argument);
}
