"""
Output technology, agents and the surprise function.

Functional forms:
    f(a, e) = a * e**alpha          gross correct answers before marking
    c(e)    = kappa * e**beta       effort cost

Agents believe their ability is ``believed_ability`` and act on a belief
``phi`` about the marker. Every other module consumes these symbols.
"""

import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from errors import InvalidArgumentError

OVERCONFIDENT = "Overconfident"
UNDERCONFIDENT = "Underconfident"


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    return value


def _positive(name: str, value: float) -> float:
    value = _finite(name, value)
    if value <= 0:
        raise InvalidArgumentError(f"{name} must be positive, got {value}")
    return value


def clamp_phi(phi: float) -> float:
    """Clamp a finite belief about the marker to [0, 1]."""
    return min(1.0, max(0.0, _finite("phi", phi)))


@dataclass(frozen=True)
class AgentProfile:
    true_ability: float
    believed_ability: float
    id: str = "agent"

    def __post_init__(self) -> None:
        _positive("true_ability", self.true_ability)
        _positive("believed_ability", self.believed_ability)

    def classification(self) -> str:
        # accurate agents are grouped with the underconfident
        if self.believed_ability > self.true_ability:
            return OVERCONFIDENT
        return UNDERCONFIDENT

    @property
    def is_overconfident(self) -> bool:
        return self.classification() == OVERCONFIDENT

    def delta(self) -> float:
        """Confidence gap a - a~ (the bound on the limit error when >= 0)."""
        return self.true_ability - self.believed_ability


@dataclass(frozen=True)
class Technology:
    effort_exponent: float = 0.5
    cost_exponent: float = 2.0
    cost_scale: float = 0.5
    noise_sigma: float = 0.35
    max_effort: float = 100.0

    def __post_init__(self) -> None:
        alpha = _finite("effort_exponent", self.effort_exponent)
        if not 0.0 < alpha < 1.0:
            raise InvalidArgumentError(f"effort_exponent must lie in (0, 1), got {alpha}")
        if _finite("cost_exponent", self.cost_exponent) <= 1.0:
            raise InvalidArgumentError(f"cost_exponent must exceed 1, got {self.cost_exponent}")
        _positive("cost_scale", self.cost_scale)
        if _finite("noise_sigma", self.noise_sigma) < 0:
            raise InvalidArgumentError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        _positive("max_effort", self.max_effort)

    def output(self, ability: float, effort: float) -> float:
        return ability * effort ** self.effort_exponent

    def cost(self, effort: float) -> float:
        return self.cost_scale * effort ** self.cost_exponent

    @property
    def deterministic(self) -> bool:
        return self.noise_sigma == 0.0


def _check_effort(effort: float) -> float:
    effort = _finite("effort", effort)
    if effort < 0:
        raise InvalidArgumentError(f"effort must be non-negative, got {effort}")
    return effort


def optimal_effort(tech: Technology, believed_ability: float, phi_belief: float) -> float:
    """Myopic effort maximizing phi * f(a~, e) - c(e).

    Closed form from the first-order condition
    ``phi * a~ * alpha * e**(alpha-1) = kappa * beta * e**(beta-1)``.
    """
    ability = _positive("believed_ability", believed_ability)
    phi = clamp_phi(phi_belief)
    if phi == 0.0:
        return 0.0
    alpha, beta = tech.effort_exponent, tech.cost_exponent
    effort = (phi * ability * alpha / (tech.cost_scale * beta)) ** (1.0 / (beta - alpha))
    return min(effort, tech.max_effort)


def numeric_optimal_effort(tech: Technology, believed_ability: float, phi_belief: float) -> float:
    """Bounded golden-section/Brent search for the same maximizer on [0, max_effort]."""
    ability = _positive("believed_ability", believed_ability)
    phi = clamp_phi(phi_belief)
    if phi == 0.0:
        return 0.0

    def negative_payoff(effort: float) -> float:
        effort = max(effort, 0.0)
        return -(phi * tech.output(ability, effort) - tech.cost(effort))

    result = minimize_scalar(
        negative_payoff,
        bounds=(0.0, tech.max_effort),
        method="bounded",
        options={"xatol": 1e-12, "maxiter": 2000},
    )
    return float(result.x)


def expected_output(tech: Technology, believed_ability: float, phi_belief: float, effort: float) -> float:
    """Net output the agent expects: phi~ * f(a~, e) - c(e)."""
    ability = _positive("believed_ability", believed_ability)
    phi = clamp_phi(phi_belief)
    effort = _check_effort(effort)
    return phi * tech.output(ability, effort) - tech.cost(effort)


def realized_output(tech: Technology, true_ability: float, phi_true: float, effort: float,
                    noise_draw: float) -> float:
    """Net output produced: Phi * f(a, e) - c(e) + noise."""
    ability = _positive("true_ability", true_ability)
    phi = clamp_phi(phi_true)
    effort = _check_effort(effort)
    return phi * tech.output(ability, effort) - tech.cost(effort) + _finite("noise_draw", noise_draw)


def gross_score(tech: Technology, ability: float, effort: float) -> float:
    """Correct answers before marking, f(ability, effort)."""
    ability = _positive("ability", ability)
    return tech.output(ability, _check_effort(effort))


def surprise(tech: Technology, agent: AgentProfile, phi_true: float, phi_belief: float) -> float:
    """Mean surprise at the effort the agent chooses under ``phi_belief``.

    Costs cancel, leaving Phi * f(a, e*) - phi~ * f(a~, e*).
    """
    phi_true = clamp_phi(phi_true)
    phi_belief = clamp_phi(phi_belief)
    effort = optimal_effort(tech, agent.believed_ability, phi_belief)
    return (phi_true * tech.output(agent.true_ability, effort)
            - phi_belief * tech.output(agent.believed_ability, effort))
