"""
Round-by-round belief updating and effort choice.

Beliefs about the marker live on a fixed grid over (0, 1]. Each round the
agent acts on the posterior mean, observes the gross mark channel
nu = Phi * f(a, e) + noise, and updates by Bayes rule as if its own ability
were a~. The ability belief is never revised.
"""

import logging
import os
from dataclasses import dataclass, replace, asdict
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import norm

import seeding
from errors import DegenerateUpdateError, InvalidArgumentError
from model_core import (
    AgentProfile,
    Technology,
    expected_output,
    gross_score,
    optimal_effort,
    realized_output,
)

logger = logging.getLogger(__name__)

DEFAULT_POINTS = 200
MASS_TOLERANCE = 1e-9
MODES = ("deterministic", "stochastic")

TRAJECTORY_COLUMNS = [
    "agent_id", "round", "true_ability", "believed_ability", "classification",
    "phi_point", "effort", "expected_output", "realized_output",
    "surprise_realized", "posterior_variance", "observed_gross",
]


def default_support(points: int = DEFAULT_POINTS) -> np.ndarray:
    """Evenly spaced beliefs 1/points, 2/points, ..., 1."""
    if points < 2:
        raise InvalidArgumentError(f"belief grid needs at least 2 points, got {points}")
    return np.linspace(1.0 / points, 1.0, points)


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        support = np.array(self.support, dtype=float)
        mass = np.array(self.mass, dtype=float)
        if support.shape != mass.shape or support.ndim != 1:
            raise InvalidArgumentError("support and mass must be 1-D arrays of equal length")
        if support[0] <= 0.0 or support[-1] > 1.0 or np.any(np.diff(support) <= 0):
            raise InvalidArgumentError("support must be increasing inside (0, 1]")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidArgumentError("mass must be finite and non-negative")
        if abs(mass.sum() - 1.0) > MASS_TOLERANCE:
            raise InvalidArgumentError(f"mass sums to {mass.sum()}, expected 1")
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    def mean(self) -> float:
        return float(self.support @ self.mass)

    def variance(self) -> float:
        centred = self.support - self.mean()
        return float((centred ** 2) @ self.mass)

    def quantile(self, q: float) -> float:
        if not 0.0 <= q <= 1.0:
            raise InvalidArgumentError(f"quantile level must lie in [0, 1], got {q}")
        cdf = np.cumsum(self.mass)
        index = int(np.searchsorted(cdf, q - MASS_TOLERANCE, side="left"))
        return float(self.support[min(index, len(self.support) - 1)])

    def nearest_index(self, phi: float) -> int:
        phi = min(1.0, max(float(self.support[0]), float(phi)))
        return int(np.argmin(np.abs(self.support - phi)))

    @classmethod
    def point_mass(cls, phi: float, points: int = DEFAULT_POINTS) -> "BeliefGrid":
        support = default_support(points)
        mass = np.zeros(points)
        mass[int(np.argmin(np.abs(support - phi)))] = 1.0
        return cls(support, mass)


def init_prior(kind: str = "uniform", mean: float = 0.5, sd: float = 0.1,
               points: int = DEFAULT_POINTS) -> BeliefGrid:
    """Prior over the marker: ``uniform`` or ``truncated_normal`` on the grid."""
    support = default_support(points)
    if kind == "uniform":
        mass = np.full(points, 1.0 / points)
    elif kind == "truncated_normal":
        if not np.isfinite(sd) or sd <= 0:
            raise InvalidArgumentError(f"prior sd must be positive, got {sd}")
        if not np.isfinite(mean):
            raise InvalidArgumentError(f"prior mean must be finite, got {mean}")
        log_density = norm.logpdf(support, loc=mean, scale=sd)
        mass = np.exp(log_density - logsumexp(log_density))
    else:
        raise InvalidArgumentError(f"unknown prior kind '{kind}'")
    return BeliefGrid(support, mass / mass.sum())


def bayes_update(belief: BeliefGrid, tech: Technology, believed_ability: float, effort: float,
                 observed_gross: float) -> BeliefGrid:
    """Posterior over the marker after observing the gross mark channel."""
    if not np.isfinite(effort) or effort <= 0:
        raise InvalidArgumentError(f"effort must be positive for an informative update, got {effort}")
    if not np.isfinite(observed_gross):
        raise InvalidArgumentError(f"observed_gross must be finite, got {observed_gross}")
    scale = gross_score(tech, believed_ability, effort)

    if tech.noise_sigma == 0.0:
        target = belief.nearest_index(observed_gross / scale)
        posterior = np.zeros_like(belief.mass)
        posterior[target] = belief.mass[target]
        total = posterior.sum()
        if total <= 0.0:
            raise DegenerateUpdateError(
                f"observation {observed_gross:.6g} points at phi={belief.support[target]:.3f}, "
                "where the prior has no mass"
            )
        return BeliefGrid(belief.support, posterior / total)

    with np.errstate(divide="ignore"):
        log_prior = np.log(belief.mass)
    log_post = log_prior + norm.logpdf(observed_gross, loc=belief.support * scale, scale=tech.noise_sigma)
    log_total = logsumexp(log_post)
    if not np.isfinite(log_total):
        raise DegenerateUpdateError(f"observation {observed_gross:.6g} has zero likelihood on the grid")
    posterior = np.exp(log_post - log_total)
    return BeliefGrid(belief.support, posterior / posterior.sum())


@dataclass(frozen=True)
class TrajectoryRecord:
    round: int
    phi_point: float
    effort: float
    expected_output: float
    realized_output: float
    surprise_realized: float
    posterior_variance: float
    observed_gross: float


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got '{mode}'")


def simulate(agent: AgentProfile, tech: Technology, phi_true: float, prior: BeliefGrid,
             rounds: int, seed: int = 0, mode: str = "stochastic",
             stream_key: Tuple[int, ...] = (0,)) -> List[TrajectoryRecord]:
    """One agent's belief and effort path over ``rounds`` rounds."""
    _check_mode(mode)
    if rounds < 1:
        raise InvalidArgumentError(f"rounds must be at least 1, got {rounds}")
    rng = seeding.stream(seed, *stream_key)
    stochastic = mode == "stochastic"
    update_tech = tech if stochastic else replace(tech, noise_sigma=0.0)

    belief = prior
    records: List[TrajectoryRecord] = []
    for t in range(1, rounds + 1):
        phi_point = belief.mean()
        effort = optimal_effort(tech, agent.believed_ability, phi_point)
        expected = expected_output(tech, agent.believed_ability, phi_point, effort)
        noise = float(rng.normal(0.0, tech.noise_sigma)) if stochastic else 0.0
        realized = realized_output(tech, agent.true_ability, phi_true, effort, noise)
        observed = phi_true * gross_score(tech, agent.true_ability, effort) + noise
        records.append(TrajectoryRecord(
            round=t,
            phi_point=phi_point,
            effort=effort,
            expected_output=expected,
            realized_output=realized,
            surprise_realized=realized - expected,
            posterior_variance=belief.variance(),
            observed_gross=observed,
        ))
        if effort > 0.0:
            belief = bayes_update(belief, update_tech, agent.believed_ability, effort, observed)
    return records


def monte_carlo(population: Sequence[Tuple[AgentProfile, BeliefGrid]], tech: Technology,
                phi_true: float, rounds: int, seed: int = 0,
                mode: str = "stochastic") -> pd.DataFrame:
    """Independent seeded simulations, one stream per agent, as a long panel."""
    rows = []
    for index, (agent, prior) in enumerate(population):
        records = simulate(agent, tech, phi_true, prior, rounds, seed=seed, mode=mode,
                           stream_key=(index,))
        for record in records:
            row = {
                "agent_id": agent.id,
                "true_ability": agent.true_ability,
                "believed_ability": agent.believed_ability,
                "classification": agent.classification(),
            }
            row.update(asdict(record))
            rows.append(row)
    frame = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    return frame.sort_values(["agent_id", "round"], kind="mergesort").reset_index(drop=True)


def draw_population(n_agents: int, seed: int, true_ability: float = 5.0,
                    gap_range: Tuple[float, float] = (0.5, 2.0),
                    prior_mean_range: Tuple[float, float] = (0.0, 1.0),
                    prior_sd: float = 0.1,
                    points: int = DEFAULT_POINTS) -> List[Tuple[AgentProfile, BeliefGrid]]:
    """Agents with a common true ability and heterogeneous gaps and priors.

    A positive gap a~ - a gives overconfident agents, a non-positive gap
    underconfident ones. Prior means are uniform on ``prior_mean_range``.
    """
    rng = seeding.stream(seed, 0x5EED)
    width = len(str(max(n_agents - 1, 0)))
    population = []
    for index in range(n_agents):
        gap = rng.uniform(*gap_range)
        believed = true_ability + gap
        if believed <= 0:
            raise InvalidArgumentError(f"gap {gap:.3f} leaves a non-positive believed ability")
        prior_mean = rng.uniform(*prior_mean_range)
        agent = AgentProfile(true_ability=true_ability, believed_ability=believed,
                             id=f"agent_{index:0{width}d}")
        population.append((agent, init_prior("truncated_normal", prior_mean, prior_sd, points)))
    return population


def round_summary(frame: pd.DataFrame, column: str = "phi_point") -> pd.DataFrame:
    """Cross-agent mean and variance of ``column`` per round and confidence group."""
    grouped = frame.groupby(["classification", "round"])[column]
    return grouped.agg(["mean", "var", "count"]).reset_index()


def write_trajectories(frame: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
