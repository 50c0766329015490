#include "garchrank/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace garchrank {

namespace {

// Kernel mass beyond 9 bandwidths is below 1e-18 of the peak.
constexpr double kCutoff = 9.0;

double quantile_sorted(const std::vector<double>& s, double prob) {
  const double pos = prob * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

double silverman_bandwidth(std::span<const double> sample) {
  if (sample.size() < 2) throw std::invalid_argument("silverman_bandwidth: need >= 2 points");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) throw std::invalid_argument("silverman_bandwidth: sample has no spread");
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityEstimate::DensityEstimate(std::span<const double> sample, double bandwidth)
    : sorted_(sample.begin(), sample.end()), bandwidth_(bandwidth) {
  if (sorted_.empty()) throw std::invalid_argument("DensityEstimate: empty sample");
  if (!(bandwidth > 0.0 && std::isfinite(bandwidth))) {
    throw std::invalid_argument("DensityEstimate: bandwidth must be positive");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

DensityEstimate DensityEstimate::silverman(std::span<const double> sample) {
  return DensityEstimate(sample, silverman_bandwidth(sample));
}

double DensityEstimate::operator()(double x) const {
  const double h = bandwidth_;
  const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - kCutoff * h);
  const auto hi = std::upper_bound(lo, sorted_.end(), x + kCutoff * h);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / h;
    acc += std::exp(-0.5 * z * z);
  }
  return acc / (static_cast<double>(sorted_.size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace garchrank
