"""
First-difference GMM for the belief-updating model

    y_it = a_i + beta * round_t + gamma * y_i,t-1 + u_it.

Differencing removes a_i and turns the round trend into a constant, so the
estimating equation is

    dy_it = beta + gamma * dy_i,t-1 + du_it,

with dy_i,t-1 instrumented by the level y_i,t-2 (``lag2_dep``) and/or the
lagged effort change e_i,t-1 - e_i,t-2 (``lag_effort``). Two-step GMM with
a 2SLS first step and a subject-clustered optimal weight second step;
standard errors are the plain two-step ones and the m1/m2 serial correlation
statistics carry the correction for estimated coefficients.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import InvalidArgumentError, UnderidentifiedError
from econometrics.distributions import chisq_sf, f_sf, two_sided_normal_p
from econometrics.linear import ols

logger = logging.getLogger(__name__)

INSTRUMENTS = ("lag_effort", "lag2_dep")
MIN_ROUNDS = 4


@dataclass
class GmmResult:
    beta: float
    gamma: float
    beta_se: float
    gamma_se: float
    beta_p: float
    gamma_p: float
    sargan_j: Optional[float]
    sargan_df: int
    sargan_p: Optional[float]
    first_stage_f: float
    first_stage_p: float
    ar1_stat: float
    ar1_p: float
    ar2_stat: float
    ar2_p: float
    instruments: Tuple[str, ...]
    n_obs: int
    n_subjects: int
    dropped_subjects: int = 0
    covariance: np.ndarray = field(default_factory=lambda: np.full((2, 2), np.nan))
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> Dict[str, object]:
        return {
            "beta": self.beta, "beta_se": self.beta_se, "beta_p": self.beta_p,
            "gamma": self.gamma, "gamma_se": self.gamma_se, "gamma_p": self.gamma_p,
            "sargan_j": self.sargan_j, "sargan_df": self.sargan_df, "sargan_p": self.sargan_p,
            "first_stage_f": self.first_stage_f, "first_stage_p": self.first_stage_p,
            "ar1_stat": self.ar1_stat, "ar1_p": self.ar1_p,
            "ar2_stat": self.ar2_stat, "ar2_p": self.ar2_p,
            "instruments": "+".join(self.instruments), "n_obs": self.n_obs,
            "n_subjects": self.n_subjects,
        }


def difference_frame(panel: pd.DataFrame, dep: str, effort_col: str = "effort_seconds",
                     entity: str = "subject_id", time: str = "round") -> Tuple[pd.DataFrame, int]:
    """Differences and lags per subject; subjects with too few rounds are dropped."""
    needed = [entity, time, dep] + ([effort_col] if effort_col in panel.columns else [])
    missing = [c for c in (entity, time, dep) if c not in panel.columns]
    if missing:
        raise InvalidArgumentError(f"panel is missing columns: {', '.join(missing)}")
    data = panel[needed].sort_values([entity, time], kind="mergesort").reset_index(drop=True)
    rounds = data.groupby(entity)[time].transform("size")
    dropped = int(data.loc[rounds < MIN_ROUNDS, entity].nunique())
    data = data.loc[rounds >= MIN_ROUNDS].reset_index(drop=True)

    grouped = data.groupby(entity)
    y = data[dep].astype(float)
    lag1 = grouped[dep].shift(1).astype(float)
    lag2 = grouped[dep].shift(2).astype(float)
    gap = data[time] - grouped[time].shift(1)

    out = pd.DataFrame({entity: data[entity], time: data[time]})
    out["dy"] = (y - lag1).where(gap == 1)
    out["dy_lag"] = out.groupby(entity)["dy"].shift(1)
    out["lag2_dep"] = lag2.where(gap == 1)
    if effort_col in data.columns:
        effort = data[effort_col].astype(float)
        d_effort = (effort - grouped[effort_col].shift(1).astype(float)).where(gap == 1)
        out["lag_effort"] = d_effort.groupby(data[entity]).shift(1)
    return out, dropped


def _serial_correlation(residuals: np.ndarray, entities: np.ndarray, times: np.ndarray, lag: int,
                        X: np.ndarray, Z: np.ndarray, weight: np.ndarray,
                        covariance: np.ndarray) -> Tuple[float, float]:
    """Arellano-Bond m statistic for differenced residuals at ``lag``, N(0,1) under no correlation.

    The variance corrects the sum of per-subject products e_t * e_t-lag for
    the estimated coefficients:

        V = sum_i a_i^2 - 2 w'X* C X'Z W (sum_i Z_i'e_i a_i) + w'X* C X*'w

    with a_i the subject's product sum, w the lagged residuals, X* the
    regressors of the current rows and C the two-step covariance.
    """
    frame = pd.DataFrame({"e": residuals, "g": entities, "t": times})
    grouped = frame.groupby("g", sort=False)
    lagged = grouped["e"].shift(lag)
    matched = (frame["t"] - grouped["t"].shift(lag) == lag).to_numpy()
    if not matched.any():
        return float("nan"), float("nan")
    w = np.where(matched, lagged.to_numpy(), 0.0)

    products = pd.Series(w * residuals).groupby(entities, sort=False).sum()
    scores = pd.DataFrame(Z * residuals[:, None]).groupby(entities, sort=False).sum()
    a = products.to_numpy()
    b = scores.loc[products.index].to_numpy()

    xw = X.T @ w
    sensitivity = covariance @ (X.T @ Z) @ weight
    variance = float(a @ a - 2.0 * xw @ sensitivity @ (b.T @ a) + xw @ covariance @ xw)
    if not np.isfinite(variance) or variance <= 0:
        return float("nan"), float("nan")
    statistic = float(a.sum()) / np.sqrt(variance)
    return statistic, two_sided_normal_p(statistic)


def _solve(X: np.ndarray, Z: np.ndarray, y: np.ndarray, weight: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    xz = X.T @ Z
    bread = xz @ weight @ xz.T
    coefficients = np.linalg.solve(bread, xz @ weight @ (Z.T @ y))
    return coefficients, bread


def diff_gmm(panel: pd.DataFrame, dep: str = "phi_hat", instruments: Sequence[str] = ("lag2_dep",),
             effort_col: str = "effort_seconds", entity: str = "subject_id",
             time: str = "round") -> GmmResult:
    """Two-step difference GMM; see the module docstring for the model."""
    instruments = tuple(instruments)
    unknown = [name for name in instruments if name not in INSTRUMENTS]
    if not instruments or unknown:
        raise InvalidArgumentError(f"instruments must be a non-empty subset of {INSTRUMENTS}")
    if "lag_effort" in instruments and effort_col not in panel.columns:
        raise InvalidArgumentError(f"lag_effort needs the '{effort_col}' column")

    frame, dropped = difference_frame(panel, dep, effort_col, entity, time)
    usable = frame.dropna(subset=["dy", "dy_lag", *instruments]).reset_index(drop=True)
    n = len(usable)
    n_params = 2
    n_instruments = len(instruments) + 1
    if n_instruments < n_params or n <= n_instruments:
        raise UnderidentifiedError("difference GMM is underidentified", n_instruments, n_params, n)

    y = usable["dy"].to_numpy()
    X = np.column_stack([np.ones(n), usable["dy_lag"].to_numpy()])
    Z = np.column_stack([np.ones(n)] + [usable[name].to_numpy() for name in instruments])
    if np.linalg.matrix_rank(Z.T @ X) < n_params or np.linalg.matrix_rank(Z) < n_instruments:
        raise UnderidentifiedError("instruments do not span the regressors", n_instruments, n_params, n)
    exactly_identified = n_instruments == n_params

    # step 1: 2SLS
    w1 = np.linalg.inv(Z.T @ Z)
    if exactly_identified:
        b1 = np.linalg.solve(Z.T @ X, Z.T @ y)
    else:
        b1, _ = _solve(X, Z, y, w1)

    # step 2: weight from subject-clustered moments at the 2SLS residuals
    e1 = y - X @ b1
    groups = usable[entity].to_numpy()
    moments = pd.DataFrame(Z * e1[:, None]).groupby(groups).sum().to_numpy()
    S = moments.T @ moments
    try:
        w2 = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        logger.warning("diff_gmm: singular moment covariance; using pseudo-inverse weight")
        w2 = np.linalg.pinv(S)
    if exactly_identified:
        b2 = b1
        bread = (X.T @ Z) @ w2 @ (Z.T @ X)
    else:
        b2, bread = _solve(X, Z, y, w2)
    covariance = np.linalg.inv(bread)
    std_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    e2 = y - X @ b2

    sargan_df = n_instruments - n_params
    if sargan_df > 0:
        g = Z.T @ e2
        sargan_j = float(g @ w2 @ g)
        sargan_p = chisq_sf(sargan_j, sargan_df)
    else:
        sargan_j = sargan_p = None

    first_stage = ols(usable["dy_lag"], usable[list(instruments)])
    q = len(instruments)
    ssr = float(first_stage.residuals @ first_stage.residuals)
    explained = first_stage.r_squared
    if first_stage.df_resid > 0 and ssr > 0:
        first_stage_f = (explained / q) / ((1.0 - explained) / first_stage.df_resid)
        first_stage_p = f_sf(first_stage_f, q, first_stage.df_resid)
    else:
        first_stage_f, first_stage_p = float("inf"), 0.0

    times = usable[time].to_numpy()
    ar1, ar1_p = _serial_correlation(e2, groups, times, 1, X, Z, w2, covariance)
    ar2, ar2_p = _serial_correlation(e2, groups, times, 2, X, Z, w2, covariance)

    with np.errstate(divide="ignore", invalid="ignore"):
        z_stats = b2 / std_errors
    p_values = [two_sided_normal_p(z) if np.isfinite(z) else float("nan") for z in z_stats]

    if dropped:
        logger.info("diff_gmm: dropped %d subjects with fewer than %d rounds", dropped, MIN_ROUNDS)
    return GmmResult(
        beta=float(b2[0]), gamma=float(b2[1]),
        beta_se=float(std_errors[0]), gamma_se=float(std_errors[1]),
        beta_p=p_values[0], gamma_p=p_values[1],
        sargan_j=sargan_j, sargan_df=sargan_df, sargan_p=sargan_p,
        first_stage_f=float(first_stage_f), first_stage_p=float(first_stage_p),
        ar1_stat=ar1, ar1_p=ar1_p, ar2_stat=ar2, ar2_p=ar2_p,
        instruments=instruments, n_obs=n, n_subjects=int(usable[entity].nunique()),
        dropped_subjects=dropped, covariance=covariance, residuals=e2,
    )
