#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace garchrank {

// Score-generating functions J on (0, 1).
enum class Score {
  Wilcoxon,       // J(u) = u
  VanDerWaerden,  // J(u) = Phi^-1(u)
  Mood,           // J(u) = (u - 1/2)^2
  Klotz,          // J(u) = (Phi^-1(u))^2
};

struct ScoreValue {
  double J;
  double dJ;
};

// Throws std::domain_error unless 0 < u < 1.
ScoreValue score_eval(Score score, double u);
double score_J(Score score, double u);
double score_dJ(Score score, double u);

// Integral of J over (0, 1): the common value of every mu_jN under H0.
double null_mean(Score score);

std::string_view score_name(Score score);
// Accepts wilcoxon|w, vdw|van_der_waerden, mood, klotz.
Score parse_score(std::string_view name);

// Right-continuous empirical distribution function.
class Edf {
 public:
  explicit Edf(std::span<const double> values);
  double operator()(double x) const;
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// k residual samples pooled for ranking.
class PooledSample {
 public:
  explicit PooledSample(std::vector<std::vector<double>> groups);

  std::size_t k() const { return groups_.size(); }
  std::size_t N() const { return values_.size(); }
  const std::vector<std::vector<double>>& groups() const { return groups_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<double>& lambda() const { return lambda_; }

  // Pooled order: position i holds the index (into values()) of the i-th
  // smallest value. Ties break by sample index, then time index.
  const std::vector<std::size_t>& order() const { return order_; }

  // Throws std::invalid_argument if some lambda_j < lambda0.
  void check_lambda_bound(double lambda0) const;

 private:
  std::vector<std::vector<double>> groups_;
  std::vector<double> values_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> within_;
  std::vector<std::size_t> sizes_;
  std::vector<double> lambda_;
  std::vector<std::size_t> order_;
};

// H_N(x) = sum_j lambda_j F_j(x).
class PooledEdf {
 public:
  explicit PooledEdf(const PooledSample& pooled);
  double operator()(double x) const;
  // Same function, evaluated through the per-sample EDFs.
  double weighted(double x) const;

 private:
  Edf all_;
  std::vector<Edf> per_group_;
  std::vector<double> lambda_;
};

// T_j = n_j^-1 sum over pooled ranks i held by sample j of J(i / (N + 1)).
std::vector<double> linear_statistics(const PooledSample& pooled, Score score);

// T_j = integral of J(N/(N+1) H_N(x)) dF_j(x), evaluated through the EDFs.
std::vector<double> linear_statistics_integral(const PooledSample& pooled, Score score);

// Rectangle rule with m cells on the quantile scale of each F_j. Exact when
// n_j divides m; a cross-check for the integral route.
std::vector<double> linear_statistics_quadrature(const PooledSample& pooled, Score score,
                                                 std::size_t m = 512);

}  // namespace garchrank
