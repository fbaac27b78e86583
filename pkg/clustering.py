"""
Gaussian mixtures over (mark, belief) points.

em_fit runs expectation-maximisation with full covariances from several
k-means++ starts and keeps the best. select_model fits k = 1..15 and picks
the model with the lowest BIC (or AIC). scale_robustness and
compare_criteria check that the chosen clustering survives rescaling one
axis and swapping the criterion.

Usage:
    points = stack_rounds(panel.retained(), rounds=(1, 5))[["mark", "phi_hat"]]
    selection = select_model(points, criterion="bic", seed=3)
    labels = hard_assignments(selection.best, points)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import rand_score

import seeding
from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

CRITERIA = ("bic", "aic")
DEFAULT_K_RANGE = tuple(range(1, 16))
RIDGE = 1e-6
TOLERANCE = 1e-7
MAX_ITER = 500
N_INIT = 10
COLLAPSE_WEIGHT = 1e-8


@dataclass
class MixtureModel:
    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    bic: float
    aic: float
    n_obs: int
    n_iter: int = 0
    converged: bool = False
    reinitialized: int = 0
    log_likelihood_trace: List[float] = field(default_factory=list)

    @property
    def n_parameters(self) -> int:
        return n_free_parameters(self.k, self.means.shape[1])

    def log_densities(self, points) -> np.ndarray:
        """log(weight_j) + log N(x | mean_j, cov_j), shape (n, k)."""
        return _weighted_log_densities(_as_points(points), self.weights, self.means, self.covariances)

    def responsibilities(self, points) -> np.ndarray:
        weighted = self.log_densities(points)
        return np.exp(weighted - logsumexp(weighted, axis=1, keepdims=True))

    def score(self, criterion: str) -> float:
        if criterion not in CRITERIA:
            raise InvalidArgumentError(f"criterion must be one of {CRITERIA}, got '{criterion}'")
        return self.bic if criterion == "bic" else self.aic


@dataclass
class ModelSelection:
    best: MixtureModel
    criterion: str
    scores: pd.DataFrame
    models: Dict[int, MixtureModel]


@dataclass(frozen=True)
class ScaleReport:
    dim: int
    factor: float
    k_before: int
    k_after: int
    rand_index: float
    assignments_before: np.ndarray
    assignments_after: np.ndarray


@dataclass(frozen=True)
class CriterionComparison:
    bic_k: int
    aic_k: int
    rand_index: float
    assignments_bic: np.ndarray
    assignments_aic: np.ndarray


def n_free_parameters(k: int, dim: int = 2) -> int:
    """Mixing weights, means and full covariances: k-1 + k*d + k*d(d+1)/2."""
    return (k - 1) + k * dim + k * dim * (dim + 1) // 2


def _as_points(points) -> np.ndarray:
    X = np.asarray(points.to_numpy() if isinstance(points, pd.DataFrame) else points, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError(f"points must be a 2-D array of shape (n, d), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("points must be finite")
    return X


def _weighted_log_densities(X: np.ndarray, weights: np.ndarray, means: np.ndarray,
                            covariances: np.ndarray) -> np.ndarray:
    n, d = X.shape
    out = np.empty((n, len(weights)))
    for j, (mean, cov) in enumerate(zip(means, covariances)):
        chol = cholesky(cov, lower=True)
        z = solve_triangular(chol, (X - mean).T, lower=True)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, j] = -0.5 * (d * np.log(2.0 * np.pi) + log_det + (z ** 2).sum(axis=0))
    with np.errstate(divide="ignore"):
        return out + np.log(weights)


def _m_step(X: np.ndarray, resp: np.ndarray, ridge: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    safe = np.where(nk > 0, nk, 1.0)
    means = (resp.T @ X) / safe[:, None]
    covariances = np.empty((len(nk), d, d))
    for j in range(len(nk)):
        diff = X - means[j]
        cov = (resp[:, j, None] * diff).T @ diff / safe[j]
        covariances[j] = (cov + cov.T) / 2.0 + ridge * np.eye(d)
    return weights, means, covariances


def _single_run(X: np.ndarray, k: int, random_state: int, max_iter: int, tol: float,
                ridge: float) -> MixtureModel:
    n, d = X.shape
    base_cov = np.cov(X.T, bias=True).reshape(d, d) + ridge * np.eye(d)
    means, _ = kmeans_plusplus(X, n_clusters=k, random_state=random_state)
    means = means.astype(float)
    weights = np.full(k, 1.0 / k)
    covariances = np.repeat(base_cov[None, :, :], k, axis=0)

    trace: List[float] = []
    reinitialized = 0
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        weighted = _weighted_log_densities(X, weights, means, covariances)
        per_point = logsumexp(weighted, axis=1)
        log_likelihood = float(per_point.sum())
        if trace and log_likelihood - trace[-1] < tol:
            trace.append(log_likelihood)
            converged = True
            break
        trace.append(log_likelihood)
        resp = np.exp(weighted - per_point[:, None])
        weights, means, covariances = _m_step(X, resp, ridge)

        collapsed = np.flatnonzero(weights < COLLAPSE_WEIGHT)
        if collapsed.size:
            # restart collapsed components at the worst-explained points
            worst = np.argsort(per_point)[:collapsed.size]
            for j, index in zip(collapsed, worst):
                means[j] = X[index]
                covariances[j] = base_cov
                weights[j] = 1.0 / k
            weights = weights / weights.sum()
            reinitialized += int(collapsed.size)
            trace = []
            logger.warning("em_fit: re-initialized %d collapsed component(s) at k=%d", collapsed.size, k)

    if not converged:
        weighted = _weighted_log_densities(X, weights, means, covariances)
        trace.append(float(logsumexp(weighted, axis=1).sum()))
    log_likelihood = trace[-1]
    p = n_free_parameters(k, d)
    return MixtureModel(
        k=k, weights=weights, means=means, covariances=covariances,
        log_likelihood=log_likelihood,
        bic=p * np.log(n) - 2.0 * log_likelihood,
        aic=2.0 * p - 2.0 * log_likelihood,
        n_obs=n, n_iter=iteration, converged=converged,
        reinitialized=reinitialized, log_likelihood_trace=trace,
    )


def em_fit(points, k: int, seed: int = 0, n_init: int = N_INIT, max_iter: int = MAX_ITER,
           tol: float = TOLERANCE, ridge: float = RIDGE) -> MixtureModel:
    """Best of ``n_init`` EM runs by final log-likelihood."""
    X = _as_points(points)
    if k < 1:
        raise InvalidArgumentError(f"k must be at least 1, got {k}")
    if len(X) < k:
        raise InvalidArgumentError(f"{len(X)} points cannot support {k} components")
    if n_init < 1:
        raise InvalidArgumentError(f"n_init must be at least 1, got {n_init}")

    best: Optional[MixtureModel] = None
    for run in range(n_init):
        model = _single_run(X, k, seeding.stream_int(seed, k, run), max_iter, tol, ridge)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    if not best.converged:
        logger.info("em_fit: k=%d reached %d iterations without converging", k, max_iter)
    return best


def hard_assignments(model: MixtureModel, points) -> np.ndarray:
    """Most responsible component per point; ties go to the lowest index."""
    return np.argmax(model.log_densities(points), axis=1)


def select_model(points, k_range: Sequence[int] = DEFAULT_K_RANGE, criterion: str = "bic",
                 seed: int = 0, n_init: int = N_INIT) -> ModelSelection:
    if criterion not in CRITERIA:
        raise InvalidArgumentError(f"criterion must be one of {CRITERIA}, got '{criterion}'")
    X = _as_points(points)
    k_range = sorted(int(k) for k in k_range)
    if not k_range:
        raise InvalidArgumentError("k_range is empty")
    if k_range[-1] > len(X):
        raise InvalidArgumentError(f"largest k {k_range[-1]} exceeds the {len(X)} points")

    models: Dict[int, MixtureModel] = {}
    rows = []
    for k in k_range:
        model = em_fit(X, k, seed=seed, n_init=n_init)
        models[k] = model
        rows.append({"k": k, "log_likelihood": model.log_likelihood, "n_parameters": model.n_parameters,
                     "bic": model.bic, "aic": model.aic, "converged": model.converged,
                     "reinitialized": model.reinitialized})
    scores = pd.DataFrame(rows, columns=["k", "log_likelihood", "n_parameters", "bic", "aic",
                                         "converged", "reinitialized"])
    best_k = int(scores.loc[scores[criterion].idxmin(), "k"])
    scores["selected"] = scores["k"] == best_k
    return ModelSelection(best=models[best_k], criterion=criterion, scores=scores, models=models)


def scale_robustness(points, dim: int = 1, factor: float = 10.0, seed: int = 0,
                     k_range: Sequence[int] = DEFAULT_K_RANGE, criterion: str = "bic",
                     n_init: int = N_INIT) -> ScaleReport:
    """Refit after multiplying one coordinate by ``factor`` and compare the partitions."""
    X = _as_points(points)
    if not 0 <= dim < X.shape[1]:
        raise InvalidArgumentError(f"dim must lie in 0..{X.shape[1] - 1}, got {dim}")
    if not (np.isfinite(factor) and factor > 0):
        raise InvalidArgumentError(f"factor must be positive, got {factor}")
    scaled = X.copy()
    scaled[:, dim] *= factor

    before = select_model(X, k_range, criterion, seed, n_init)
    after = select_model(scaled, k_range, criterion, seed, n_init)
    labels_before = hard_assignments(before.best, X)
    labels_after = hard_assignments(after.best, scaled)
    return ScaleReport(
        dim=dim, factor=float(factor),
        k_before=before.best.k, k_after=after.best.k,
        rand_index=float(rand_score(labels_before, labels_after)),
        assignments_before=labels_before, assignments_after=labels_after,
    )


def compare_criteria(points, seed: int = 0, k_range: Sequence[int] = DEFAULT_K_RANGE,
                     n_init: int = N_INIT) -> CriterionComparison:
    X = _as_points(points)
    by_bic = select_model(X, k_range, "bic", seed, n_init)
    by_aic = select_model(X, k_range, "aic", seed, n_init)
    labels_bic = hard_assignments(by_bic.best, X)
    labels_aic = hard_assignments(by_aic.best, X)
    return CriterionComparison(
        bic_k=by_bic.best.k, aic_k=by_aic.best.k,
        rand_index=float(rand_score(labels_bic, labels_aic)),
        assignments_bic=labels_bic, assignments_aic=labels_aic,
    )


def stack_rounds(panel: pd.DataFrame, rounds: Tuple[int, int] = (1, 5),
                 columns: Tuple[str, str] = ("mark", "phi_hat"),
                 overconfident_only: bool = True) -> pd.DataFrame:
    """Rows of the two rounds stacked, with missing values dropped."""
    missing = [c for c in ("subject_id", "round", *columns) if c not in panel.columns]
    if missing:
        raise InvalidArgumentError(f"panel is missing columns: {', '.join(missing)}")
    data = panel.loc[panel["round"].isin(rounds)]
    if overconfident_only and "overconfident" in data.columns:
        data = data.loc[data["overconfident"].astype(int) == 1]
    data = data[["subject_id", "round", *columns]].dropna()
    return data.sort_values(["round", "subject_id"], kind="mergesort").reset_index(drop=True)


def two_cluster_points(n: int = 200, centers: Sequence[Tuple[float, float]] = ((2.0, 0.2), (2.0, 0.8)),
                       sd: float = 0.03, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Equal-sized spherical Gaussian clusters; returns points and true labels."""
    if n < len(centers):
        raise InvalidArgumentError(f"n={n} is smaller than the number of clusters")
    rng = seeding.stream(seed, 0xC1)
    labels = np.arange(n) % len(centers)
    points = np.asarray(centers, dtype=float)[labels] + rng.normal(0.0, sd, size=(n, 2))
    return points, labels


def assignments_frame(stacked: pd.DataFrame, labels: np.ndarray) -> pd.DataFrame:
    out = stacked.copy()
    out["cluster"] = np.asarray(labels, dtype=int)
    return out
