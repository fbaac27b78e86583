"""Estimators and tests for the belief panels: OLS, panel FE/RE, difference GMM,
paired t-tests, kernel densities and the distribution functions behind every p-value."""

from econometrics.distributions import (
    chisq_cdf,
    chisq_sf,
    f_cdf,
    f_sf,
    normal_cdf,
    normal_sf,
    student_t_cdf,
    student_t_sf,
)
from econometrics.linear import RegressionResult, ols
from econometrics.panel import HausmanResult, hausman, random_effects, within_fe
from econometrics.hypothesis import (
    TTestResult,
    paired_t_one_sided,
    round_pair_ttests,
    variance_target,
)
from econometrics.dynamic_panel import GmmResult, diff_gmm
from econometrics.density import KdeCurve, kde, silverman_bandwidth

__all__ = [
    "chisq_cdf", "chisq_sf", "f_cdf", "f_sf", "normal_cdf", "normal_sf",
    "student_t_cdf", "student_t_sf",
    "RegressionResult", "ols",
    "HausmanResult", "hausman", "random_effects", "within_fe",
    "TTestResult", "paired_t_one_sided", "round_pair_ttests", "variance_target",
    "GmmResult", "diff_gmm",
    "KdeCurve", "kde", "silverman_bandwidth",
]
