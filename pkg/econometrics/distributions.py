"""
CDFs and survival functions for the reference distributions.

Student t and F go through the regularized incomplete beta function, the
chi-square through the regularized incomplete gamma function, the normal
through the complementary error function. Survival functions use the
complementary special function directly so small upper tails keep their
precision.
"""

import math

from scipy import special

from errors import InvalidArgumentError

SQRT2 = math.sqrt(2.0)


def _check_df(name: str, df: float) -> float:
    df = float(df)
    if not (math.isfinite(df) and df > 0):
        raise InvalidArgumentError(f"{name} must be positive and finite, got {df}")
    return df


def _check_x(x: float) -> float:
    x = float(x)
    if math.isnan(x):
        raise InvalidArgumentError("argument must not be NaN")
    return x


def student_t_cdf(t: float, df: float) -> float:
    df = _check_df("df", df)
    t = _check_x(t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return float(1.0 - tail if t > 0 else tail)


def student_t_sf(t: float, df: float) -> float:
    return student_t_cdf(-_check_x(t), df)


def f_cdf(x: float, dfn: float, dfd: float) -> float:
    dfn, dfd = _check_df("dfn", dfn), _check_df("dfd", dfd)
    x = _check_x(x)
    if x <= 0:
        return 0.0
    return float(special.betainc(dfn / 2.0, dfd / 2.0, dfn * x / (dfn * x + dfd)))


def f_sf(x: float, dfn: float, dfd: float) -> float:
    dfn, dfd = _check_df("dfn", dfn), _check_df("dfd", dfd)
    x = _check_x(x)
    if x <= 0:
        return 1.0
    return float(special.betainc(dfd / 2.0, dfn / 2.0, dfd / (dfd + dfn * x)))


def chisq_cdf(x: float, df: float) -> float:
    df = _check_df("df", df)
    x = _check_x(x)
    if x <= 0:
        return 0.0
    return float(special.gammainc(df / 2.0, x / 2.0))


def chisq_sf(x: float, df: float) -> float:
    df = _check_df("df", df)
    x = _check_x(x)
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def normal_cdf(z: float) -> float:
    return float(0.5 * special.erfc(-_check_x(z) / SQRT2))


def normal_sf(z: float) -> float:
    return float(0.5 * special.erfc(_check_x(z) / SQRT2))


def two_sided_normal_p(z: float) -> float:
    return min(1.0, 2.0 * normal_sf(abs(_check_x(z))))


def two_sided_t_p(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(_check_x(t)), df))
