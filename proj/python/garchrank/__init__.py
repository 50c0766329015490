"""Rank-based k-sample tests for the innovation laws of GARCH series."""

from garchrank._core import (
    FitError,
    asymptotic_test,
    bootstrap_test,
    chi2_survival,
    dgp1,
    dgp2,
    fit,
    inverse_normal_cdf,
    linear_statistics,
    lyapunov_exponent,
    null_mean,
    simulate,
)

__all__ = [
    "FitError",
    "asymptotic_test",
    "bootstrap_test",
    "chi2_survival",
    "dgp1",
    "dgp2",
    "fit",
    "inverse_normal_cdf",
    "linear_statistics",
    "lyapunov_exponent",
    "null_mean",
    "simulate",
]
