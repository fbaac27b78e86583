"""Least squares with classical standard errors."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from errors import InvalidArgumentError, SingularDesignError
from econometrics.distributions import two_sided_t_p

CONST = "const"


@dataclass
class RegressionResult:
    names: List[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    n_obs: int
    df_resid: int
    residuals: np.ndarray
    covariance: np.ndarray
    method: str = "OLS"
    dependent: str = "y"
    notes: Dict[str, Any] = field(default_factory=dict)

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"'{name}' not in {self.names}")

    def coef(self, name: str) -> float:
        return float(self.coefficients[self._index(name)])

    def se(self, name: str) -> float:
        return float(self.std_errors[self._index(name)])

    def pvalue(self, name: str) -> float:
        return float(self.p_values[self._index(name)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "coefficient": self.coefficients,
                "std_error": self.std_errors,
                "t": self.t_stats,
                "p": self.p_values,
            },
            index=pd.Index(self.names, name="term"),
        )


def fit_least_squares(y: np.ndarray, X: np.ndarray, names: List[str], df_resid: int,
                      centered: bool, method: str = "OLS", dependent: str = "y") -> RegressionResult:
    """QR solution of the normal equations with classical covariance.

    ``df_resid`` is passed in so panel estimators can charge for absorbed
    subject effects. ``centered`` selects the centred or uncentred R².
    """
    n, k = X.shape
    if n < k:
        raise SingularDesignError(f"{n} observations cannot identify {k} coefficients")
    if np.linalg.matrix_rank(X) < k:
        raise SingularDesignError(f"design matrix with columns {names} is rank deficient")

    q, r = np.linalg.qr(X)
    coefficients = solve_triangular(r, q.T @ y)
    residuals = y - X @ coefficients
    ssr = float(residuals @ residuals)

    r_inv = solve_triangular(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    if df_resid > 0:
        sigma2 = ssr / df_resid
        covariance = sigma2 * xtx_inv
        std_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    else:
        covariance = np.full((k, k), np.nan)
        std_errors = np.full(k, np.nan)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = coefficients / std_errors
    p_values = np.array([
        two_sided_t_p(t, df_resid) if df_resid > 0 and np.isfinite(t) else np.nan
        for t in t_stats
    ])

    tss = float(((y - y.mean()) ** 2).sum()) if centered else float(y @ y)
    if tss > 0:
        r_squared = 1.0 - ssr / tss
        lost = 1 if centered else 0
        adj = (1.0 - (n - lost) / df_resid * (1.0 - r_squared)) if df_resid > 0 else np.nan
    else:
        r_squared = adj = np.nan

    return RegressionResult(
        names=list(names),
        coefficients=coefficients,
        std_errors=std_errors,
        t_stats=t_stats,
        p_values=p_values,
        r_squared=float(r_squared),
        adj_r_squared=float(adj),
        n_obs=n,
        df_resid=int(df_resid),
        residuals=residuals,
        covariance=covariance,
        method=method,
        dependent=dependent,
    )


def _as_matrix(X, names: Optional[Sequence[str]]):
    if isinstance(X, pd.DataFrame):
        return X.to_numpy(dtype=float), list(X.columns)
    if isinstance(X, pd.Series):
        return X.to_numpy(dtype=float)[:, None], [X.name or "x1"]
    matrix = np.asarray(X, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    labels = list(names) if names is not None else [f"x{i + 1}" for i in range(matrix.shape[1])]
    return matrix, labels


def ols(y, X, include_intercept: bool = True, names: Optional[Sequence[str]] = None,
        dependent: Optional[str] = None) -> RegressionResult:
    """Ordinary least squares of ``y`` on the columns of ``X``.

    The intercept, when requested, is the first coefficient and is named
    ``const``.
    """
    matrix, labels = _as_matrix(X, names)
    target = np.asarray(y, dtype=float).ravel()
    if dependent is None:
        dependent = getattr(y, "name", None) or "y"
    if matrix.shape[0] != target.shape[0]:
        raise InvalidArgumentError(f"y has {target.shape[0]} rows but X has {matrix.shape[0]}")
    if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(target))):
        raise InvalidArgumentError("ols inputs must be finite; drop missing rows first")
    if len(labels) != matrix.shape[1]:
        raise InvalidArgumentError("names must match the number of columns of X")
    if include_intercept:
        matrix = np.column_stack([np.ones(len(target)), matrix])
        labels = [CONST] + labels
    n, k = matrix.shape
    return fit_least_squares(target, matrix, labels, n - k, centered=include_intercept,
                             dependent=dependent)
