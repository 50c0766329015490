#pragma once

#include <span>
#include <vector>

namespace garchrank {

// 0.9 min(sd, IQR / 1.34) n^(-1/5). Needs two or more points with spread.
double silverman_bandwidth(std::span<const double> sample);

// Gaussian kernel density estimate. Integrates to one by construction.
class DensityEstimate {
 public:
  DensityEstimate(std::span<const double> sample, double bandwidth);
  static DensityEstimate silverman(std::span<const double> sample);

  double operator()(double x) const;
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& sample() const { return sorted_; }

 private:
  std::vector<double> sorted_;
  double bandwidth_;
};

}  // namespace garchrank
