"""
Limit beliefs of a misspecified learner.

An equilibrium is a belief phi and an effort e such that e is optimal given
phi and the mean surprise at e is zero, so updating stops there. Under the
multiplicative technology the interior root is Phi * a / a~; when that exceeds
one the surprise stays positive on all of (0, 1] and the limit is the
boundary belief phi = 1.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from errors import InvalidArgumentError
from model_core import AgentProfile, Technology, optimal_effort, surprise

logger = logging.getLogger(__name__)

GAMMA_TOLERANCE = 1e-10
REPORT_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
PHI_FLOOR = 1e-12

EQUILIBRIUM_COLUMNS = [
    "true_ability", "believed_ability", "phi_true", "classification",
    "phi_limit", "effort_limit", "boundary", "gamma_residual", "foc_residual",
    "limit_below_truth", "within_confidence_gap",
]


@dataclass(frozen=True)
class Equilibrium:
    phi_limit: float
    effort_limit: float
    boundary: bool
    gamma_residual: float
    foc_residual: float
    iterations: int = 0


@dataclass(frozen=True)
class EquilibriumReport:
    status: str  # "pass", "pass-with-boundary" or "fail"
    gamma_residual: float
    effort_residual: float
    foc_residual: float

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def _check_phi_true(phi_true: float) -> float:
    phi_true = float(phi_true)
    if not np.isfinite(phi_true) or not 0.0 < phi_true <= 1.0:
        raise InvalidArgumentError(f"phi_true must lie in (0, 1], got {phi_true}")
    return phi_true


def foc_residual(tech: Technology, believed_ability: float, phi: float, effort: float) -> float:
    """Marginal expected payoff phi * f_e(a~, e) - c'(e) at ``effort``."""
    if effort <= 0.0:
        return 0.0 if phi == 0.0 else float("inf")
    alpha, beta = tech.effort_exponent, tech.cost_exponent
    marginal_output = phi * believed_ability * alpha * effort ** (alpha - 1.0)
    marginal_cost = tech.cost_scale * beta * effort ** (beta - 1.0)
    return marginal_output - marginal_cost


def solve_equilibrium(tech: Technology, agent: AgentProfile, phi_true: float) -> Equilibrium:
    """Root of the surprise function on (0, 1] by bisection."""
    phi_true = _check_phi_true(phi_true)

    def gamma(phi: float) -> float:
        return surprise(tech, agent, phi_true, phi)

    upper = gamma(1.0)
    if upper >= 0.0:
        # no sign change: interior fixed point at or beyond phi = 1
        effort = optimal_effort(tech, agent.believed_ability, 1.0)
        boundary = upper > 0.0
        if boundary:
            logger.info("boundary equilibrium for agent %s: gamma(1)=%.3g", agent.id, upper)
        return Equilibrium(
            phi_limit=1.0,
            effort_limit=effort,
            boundary=boundary,
            gamma_residual=upper,
            foc_residual=foc_residual(tech, agent.believed_ability, 1.0, effort),
        )

    root, info = bisect(
        gamma, PHI_FLOOR, 1.0, xtol=1e-15, maxiter=MAX_ITERATIONS,
        full_output=True, disp=False,
    )
    residual = gamma(root)
    if abs(residual) > GAMMA_TOLERANCE:
        logger.warning("bisection stopped at |gamma|=%.3g after %d iterations", abs(residual), info.iterations)
    effort = optimal_effort(tech, agent.believed_ability, root)
    return Equilibrium(
        phi_limit=float(root),
        effort_limit=effort,
        boundary=False,
        gamma_residual=residual,
        foc_residual=foc_residual(tech, agent.believed_ability, root, effort),
        iterations=info.iterations,
    )


def verify_equilibrium(eq: Equilibrium, tech: Technology, agent: AgentProfile,
                       phi_true: float) -> EquilibriumReport:
    """Recompute optimality of the effort and zero surprise at the belief."""
    phi_true = _check_phi_true(phi_true)
    best_effort = optimal_effort(tech, agent.believed_ability, eq.phi_limit)
    effort_residual = abs(eq.effort_limit - best_effort)
    foc = foc_residual(tech, agent.believed_ability, eq.phi_limit, eq.effort_limit)
    gamma = surprise(tech, agent, phi_true, eq.phi_limit)

    optimal = effort_residual <= REPORT_TOLERANCE and abs(foc) <= REPORT_TOLERANCE
    if optimal and abs(gamma) <= REPORT_TOLERANCE:
        status = "pass"
    elif optimal and eq.phi_limit == 1.0 and gamma > 0.0:
        status = "pass-with-boundary"
    else:
        status = "fail"
    return EquilibriumReport(status, gamma, effort_residual, foc)


def grid_equilibrium(tech: Technology, agent: AgentProfile, phi_true: float,
                     points: int = 100_000) -> float:
    """Brute-force argmin |gamma| over an evenly spaced belief grid."""
    phi_true = _check_phi_true(phi_true)
    phi = np.linspace(1.0 / points, 1.0, points)
    alpha, beta = tech.effort_exponent, tech.cost_exponent
    effort = (phi * agent.believed_ability * alpha / (tech.cost_scale * beta)) ** (1.0 / (beta - alpha))
    gross = effort ** alpha
    gamma = gross * (phi_true * agent.true_ability - phi * agent.believed_ability)
    return float(phi[np.argmin(np.abs(gamma))])


def limit_below_truth(eq: Equilibrium, phi_true: float) -> bool:
    """Overconfident limit: the marker is believed harsher than it is."""
    return eq.phi_limit < phi_true


def within_confidence_gap(eq: Equilibrium, agent: AgentProfile, phi_true: float) -> bool:
    """Underconfident limit error bounded by the confidence gap a - a~."""
    return abs(eq.phi_limit - phi_true) <= agent.delta() + 1e-12


def equilibrium_table(tech: Technology, true_abilities: Iterable[float],
                      believed_abilities: Iterable[float],
                      phi_trues: Iterable[float]) -> pd.DataFrame:
    """Sweep the (a, a~, Phi) grid; one row per combination."""
    rows: List[dict] = []
    for a, a_tilde, phi_true in itertools.product(true_abilities, believed_abilities, phi_trues):
        agent = AgentProfile(true_ability=a, believed_ability=a_tilde)
        eq = solve_equilibrium(tech, agent, phi_true)
        rows.append({
            "true_ability": a,
            "believed_ability": a_tilde,
            "phi_true": phi_true,
            "classification": agent.classification(),
            "phi_limit": eq.phi_limit,
            "effort_limit": eq.effort_limit,
            "boundary": eq.boundary,
            "gamma_residual": eq.gamma_residual,
            "foc_residual": eq.foc_residual,
            "limit_below_truth": limit_below_truth(eq, phi_true),
            "within_confidence_gap": within_confidence_gap(eq, agent, phi_true),
        })
    return pd.DataFrame(rows, columns=EQUILIBRIUM_COLUMNS)
