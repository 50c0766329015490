#pragma once

#include <cstddef>

namespace garchrank {

double normal_pdf(double x);
double normal_cdf(double x);

// Standard normal quantile. Throws std::domain_error unless 0 < u < 1.
// Absolute error below 1e-9 on (1e-12, 1 - 1e-12).
double inverse_normal_cdf(double u);

// Upper tail of the chi-square law with `dof` degrees of freedom.
double chi2_survival(double x, std::size_t dof);
double chi2_cdf(double x, std::size_t dof);
double chi2_quantile(double prob, std::size_t dof);

}  // namespace garchrank
