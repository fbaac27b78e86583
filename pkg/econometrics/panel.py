"""
Fixed and random effects for subject-by-round panels, and the Hausman test
between them.

Random effects use Swamy-Arora variance components: the idiosyncratic
variance from the within regression, the subject-effect variance from the
between regression of subject means. A negative subject-effect estimate is
floored at zero and flagged.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from errors import InvalidArgumentError, SingularDesignError
from econometrics.distributions import chisq_sf
from econometrics.linear import CONST, RegressionResult, fit_least_squares, ols

logger = logging.getLogger(__name__)

WITHIN_TOLERANCE = 1e-10


def _prepare(panel: pd.DataFrame, y: str, x_vars: Sequence[str], entity: str, time: str) -> pd.DataFrame:
    needed = list(dict.fromkeys([entity, time, y] + list(x_vars)))
    missing = [c for c in needed if c not in panel.columns]
    if missing:
        raise InvalidArgumentError(f"panel is missing columns: {', '.join(missing)}")
    if not x_vars:
        raise InvalidArgumentError("at least one regressor is required")
    data = panel[needed].dropna()
    data = data.astype({c: float for c in [y] + list(x_vars)})
    return data.sort_values([entity, time], kind="mergesort").reset_index(drop=True)


def _demean(data: pd.DataFrame, columns: List[str], entity: str) -> pd.DataFrame:
    return data[columns] - data.groupby(entity)[columns].transform("mean")


def _varying(demeaned: pd.DataFrame, x_vars: Sequence[str]) -> List[str]:
    return [c for c in x_vars if demeaned[c].abs().max() > WITHIN_TOLERANCE]


def _independent_columns(frame: pd.DataFrame, columns: Sequence[str]) -> List[str]:
    """Greedy subset of ``columns`` that stays full rank next to an intercept."""
    kept: List[str] = []
    basis = np.ones((len(frame), 1))
    for column in columns:
        candidate = np.column_stack([basis, frame[column].to_numpy(dtype=float)])
        if np.linalg.matrix_rank(candidate) == candidate.shape[1]:
            basis = candidate
            kept.append(column)
    return kept


def within_fe(panel: pd.DataFrame, y: str, x_vars: Sequence[str], entity: str = "subject_id",
              time: str = "round") -> RegressionResult:
    """Within (subject-demeaned) OLS.

    Subjects observed once carry no within variation and are dropped; so are
    regressors constant within every subject. Both are reported in ``notes``.
    """
    data = _prepare(panel, y, x_vars, entity, time)
    sizes = data.groupby(entity)[y].transform("size")
    singletons = int(data.loc[sizes == 1, entity].nunique())
    if singletons:
        logger.info("within_fe: dropped %d subjects with a single observation", singletons)
        data = data.loc[sizes > 1].reset_index(drop=True)

    demeaned = _demean(data, [y] + list(x_vars), entity)
    kept = _varying(demeaned, x_vars)
    dropped = [c for c in x_vars if c not in kept]
    if dropped:
        logger.info("within_fe: absorbed subject-constant regressors %s", dropped)
    if not kept:
        raise SingularDesignError("no regressor varies within subjects")

    n_entities = int(data[entity].nunique())
    n = len(data)
    result = fit_least_squares(
        demeaned[y].to_numpy(), demeaned[kept].to_numpy(), kept,
        df_resid=n - n_entities - len(kept), centered=False, method="FE", dependent=y,
    )
    result.notes.update({
        "n_entities": n_entities,
        "dropped_singletons": singletons,
        "dropped_columns": dropped,
    })
    return result


def random_effects(panel: pd.DataFrame, y: str, x_vars: Sequence[str], entity: str = "subject_id",
                   time: str = "round") -> RegressionResult:
    """Feasible GLS with Swamy-Arora variance components and an intercept."""
    data = _prepare(panel, y, x_vars, entity, time)
    x_vars = list(x_vars)
    n = len(data)
    sizes = data.groupby(entity)[y].transform("size").to_numpy(dtype=float)
    n_entities = int(data[entity].nunique())

    demeaned = _demean(data, [y] + x_vars, entity)
    varying = _varying(demeaned, x_vars)
    within_df = n - n_entities - len(varying)
    if within_df <= 0:
        raise SingularDesignError("not enough within variation for the idiosyncratic variance")
    if varying:
        within = fit_least_squares(demeaned[y].to_numpy(), demeaned[varying].to_numpy(), varying,
                                   df_resid=within_df, centered=False)
        ssr_within = float(within.residuals @ within.residuals)
    else:
        ssr_within = float(demeaned[y] @ demeaned[y])
    sigma2_e = ssr_within / within_df

    means = data.groupby(entity)[[y] + x_vars].mean()
    between_vars = _independent_columns(means, x_vars)
    between_df = n_entities - len(between_vars) - 1
    if between_df <= 0:
        raise SingularDesignError(f"{n_entities} subjects cannot identify the between regression")
    if between_vars:
        between = ols(means[y], means[between_vars])
        between_resid = between.residuals
    else:
        between_resid = (means[y] - means[y].mean()).to_numpy()
    sigma2_between = float(between_resid @ between_resid) / between_df
    t_bar = n_entities / float((1.0 / data.groupby(entity)[y].size()).sum())
    sigma2_u = sigma2_between - sigma2_e / t_bar
    floored = sigma2_u < 0
    if floored:
        logger.warning("random_effects: negative subject variance %.3g floored at 0", sigma2_u)
        sigma2_u = 0.0

    if sigma2_e > 0:
        theta = 1.0 - np.sqrt(sigma2_e / (sizes * sigma2_u + sigma2_e))
    else:
        theta = np.ones(n)
    group_means = data.groupby(entity)[[y] + x_vars].transform("mean")
    y_star = data[y].to_numpy() - theta * group_means[y].to_numpy()
    x_star = data[x_vars].to_numpy() - theta[:, None] * group_means[x_vars].to_numpy()
    design = np.column_stack([1.0 - theta, x_star])
    names = [CONST] + x_vars

    result = fit_least_squares(y_star, design, names, df_resid=n - len(names), centered=False,
                               method="RE", dependent=y)
    fitted = np.column_stack([np.ones(n), data[x_vars].to_numpy()]) @ result.coefficients
    y_raw = data[y].to_numpy()
    tss = float(((y_raw - y_raw.mean()) ** 2).sum())
    if tss > 0:
        result.r_squared = 1.0 - float(((y_raw - fitted) ** 2).sum()) / tss
        result.adj_r_squared = 1.0 - (n - 1) / (n - len(names)) * (1.0 - result.r_squared)
    result.notes.update({
        "n_entities": n_entities,
        "sigma2_u": sigma2_u,
        "sigma2_e": sigma2_e,
        "theta_mean": float(theta.mean()),
        "variance_floored": bool(floored),
    })
    return result


@dataclass(frozen=True)
class HausmanResult:
    statistic: float
    df: int
    p_value: float
    used_pseudo_inverse: bool
    coefficients: tuple


def hausman(fe: RegressionResult, re: RegressionResult) -> HausmanResult:
    """H = d'(V_fe - V_re)^-1 d on the coefficients both estimators report."""
    common = [name for name in fe.names if name in re.names and name != CONST]
    if not common:
        raise InvalidArgumentError("FE and RE results share no coefficients")
    fe_idx = [fe.names.index(c) for c in common]
    re_idx = [re.names.index(c) for c in common]
    diff = fe.coefficients[fe_idx] - re.coefficients[re_idx]
    v_diff = fe.covariance[np.ix_(fe_idx, fe_idx)] - re.covariance[np.ix_(re_idx, re_idx)]
    v_diff = (v_diff + v_diff.T) / 2.0

    eigenvalues = np.linalg.eigvalsh(v_diff)
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    pseudo = bool(eigenvalues.min() <= 1e-12 * scale)
    if pseudo:
        logger.warning("hausman: covariance difference is not positive definite; using pseudo-inverse")
        inverse = np.linalg.pinv(v_diff)
        df = int(np.linalg.matrix_rank(v_diff))
    else:
        inverse = np.linalg.inv(v_diff)
        df = len(common)

    statistic = max(0.0, float(diff @ inverse @ diff))
    p_value = chisq_sf(statistic, df) if df > 0 else 1.0
    return HausmanResult(statistic, df, p_value, pseudo, tuple(common))
