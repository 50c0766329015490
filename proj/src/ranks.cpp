#include "garchrank/ranks.hpp"

#include "garchrank/special.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace garchrank {

ScoreValue score_eval(Score score, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("score argument must lie in (0, 1)");
  switch (score) {
    case Score::Wilcoxon:
      return {u, 1.0};
    case Score::VanDerWaerden: {
      const double z = inverse_normal_cdf(u);
      return {z, 1.0 / normal_pdf(z)};
    }
    case Score::Mood:
      return {(u - 0.5) * (u - 0.5), 2.0 * (u - 0.5)};
    case Score::Klotz: {
      const double z = inverse_normal_cdf(u);
      return {z * z, 2.0 * z / normal_pdf(z)};
    }
  }
  throw std::invalid_argument("unknown score");
}

double score_J(Score score, double u) { return score_eval(score, u).J; }
double score_dJ(Score score, double u) { return score_eval(score, u).dJ; }

double null_mean(Score score) {
  switch (score) {
    case Score::Wilcoxon:
      return 0.5;
    case Score::VanDerWaerden:
      return 0.0;
    case Score::Mood:
      return 1.0 / 12.0;
    case Score::Klotz:
      return 1.0;
  }
  throw std::invalid_argument("unknown score");
}

std::string_view score_name(Score score) {
  switch (score) {
    case Score::Wilcoxon:
      return "wilcoxon";
    case Score::VanDerWaerden:
      return "vdw";
    case Score::Mood:
      return "mood";
    case Score::Klotz:
      return "klotz";
  }
  return "unknown";
}

Score parse_score(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "wilcoxon" || s == "w") return Score::Wilcoxon;
  if (s == "vdw" || s == "van_der_waerden" || s == "vanderwaerden") return Score::VanDerWaerden;
  if (s == "mood") return Score::Mood;
  if (s == "klotz") return Score::Klotz;
  throw std::invalid_argument("unknown score '" + std::string(name) + "'");
}

Edf::Edf(std::span<const double> values) : sorted_(values.begin(), values.end()) {
  if (sorted_.empty()) throw std::invalid_argument("Edf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Edf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

PooledSample::PooledSample(std::vector<std::vector<double>> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw std::invalid_argument("PooledSample: no samples");
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    if (groups_[j].empty()) {
      throw std::invalid_argument("PooledSample: sample " + std::to_string(j + 1) + " is empty");
    }
    sizes_.push_back(groups_[j].size());
    for (std::size_t t = 0; t < groups_[j].size(); ++t) {
      const double v = groups_[j][t];
      if (!std::isfinite(v)) throw std::invalid_argument("PooledSample: non-finite value");
      values_.push_back(v);
      labels_.push_back(j);
      within_.push_back(t);
    }
  }
  const double n_total = static_cast<double>(values_.size());
  for (std::size_t n : sizes_) lambda_.push_back(static_cast<double>(n) / n_total);

  order_.resize(values_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    if (values_[a] != values_[b]) return values_[a] < values_[b];
    if (labels_[a] != labels_[b]) return labels_[a] < labels_[b];
    return within_[a] < within_[b];
  });
}

void PooledSample::check_lambda_bound(double lambda0) const {
  for (std::size_t j = 0; j < lambda_.size(); ++j) {
    if (lambda_[j] < lambda0 || lambda_[j] > 1.0 - lambda0 + 1e-15) {
      throw std::invalid_argument("sample " + std::to_string(j + 1) +
                                  " violates the sample-fraction bound");
    }
  }
}

PooledEdf::PooledEdf(const PooledSample& pooled)
    : all_(pooled.values()), lambda_(pooled.lambda()) {
  for (const auto& g : pooled.groups()) per_group_.emplace_back(g);
}

double PooledEdf::operator()(double x) const { return all_(x); }

double PooledEdf::weighted(double x) const {
  double h = 0.0;
  for (std::size_t j = 0; j < per_group_.size(); ++j) h += lambda_[j] * per_group_[j](x);
  return h;
}

std::vector<double> linear_statistics(const PooledSample& pooled, Score score) {
  const std::size_t N = pooled.N();
  std::vector<double> t(pooled.k(), 0.0);
  const auto& order = pooled.order();
  for (std::size_t i = 0; i < N; ++i) {
    const double u = static_cast<double>(i + 1) / static_cast<double>(N + 1);
    t[pooled.labels()[order[i]]] += score_J(score, u);
  }
  for (std::size_t j = 0; j < t.size(); ++j) t[j] /= static_cast<double>(pooled.sizes()[j]);
  return t;
}

std::vector<double> linear_statistics_integral(const PooledSample& pooled, Score score) {
  const PooledEdf H(pooled);
  const double N = static_cast<double>(pooled.N());
  std::vector<double> t(pooled.k(), 0.0);
  for (std::size_t j = 0; j < pooled.k(); ++j) {
    // dF_j puts mass 1/n_j on each observation of sample j.
    for (double x : pooled.groups()[j]) t[j] += score_J(score, N / (N + 1.0) * H(x));
    t[j] /= static_cast<double>(pooled.sizes()[j]);
  }
  return t;
}

std::vector<double> linear_statistics_quadrature(const PooledSample& pooled, Score score,
                                                 std::size_t m) {
  if (m == 0) throw std::invalid_argument("quadrature needs m >= 1");
  const PooledEdf H(pooled);
  const double N = static_cast<double>(pooled.N());
  std::vector<double> t(pooled.k(), 0.0);
  for (std::size_t j = 0; j < pooled.k(); ++j) {
    const Edf Fj(pooled.groups()[j]);
    const auto& xs = Fj.sorted();
    const double nj = static_cast<double>(xs.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double v = (static_cast<double>(c) + 0.5) / static_cast<double>(m);
      // Left-continuous quantile of F_j at v.
      auto idx = static_cast<std::size_t>(std::ceil(v * nj)) - 1;
      idx = std::min(idx, xs.size() - 1);
      acc += score_J(score, N / (N + 1.0) * H(xs[idx]));
    }
    t[j] = acc / static_cast<double>(m);
  }
  return t;
}

}  // namespace garchrank
