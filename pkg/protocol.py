"""
Experimental procedure run on simulated subjects.

Each subject answers ``questions_per_round`` questions per round, sees a
mark equal to the number of correct answers times the marker rate, and bids
in a BDM auction for a fully marked test. The bid, divided by the final
piece rate, gives the score the subject expects from full marking; marks
divided by that score recover the subject's belief about the marker.

Usage:
    spec = PopulationSpec(n_subjects=189)
    panel = generate_panel(spec, ExperimentConfig(), seed=7)
    panel.to_csv("data/panel.csv")
"""

import logging
import math
import os
from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import seeding
from dynamics import BeliefGrid, bayes_update, init_prior
from errors import ConfigurationError, InvalidArgumentError, SchemaError
from model_core import (
    OVERCONFIDENT,
    UNDERCONFIDENT,
    AgentProfile,
    Technology,
    gross_score,
    optimal_effort,
)

logger = logging.getLogger(__name__)

PANEL_COLUMNS = [
    "subject_id", "round", "score", "mark", "bid", "phi_hat", "effort_seconds",
    "overconfident", "stated_score_r1", "male", "age", "white", "excluded",
]
PAYOFF_COLUMNS = [
    "subject_id", "round_earnings", "confidence_bonus", "bdm_round", "bdm_bid",
    "bdm_price", "bdm_win", "bonus_test_score", "bonus_test_earnings",
    "participation_fee", "total",
]
BID_BASES = ("final_test", "current_round")
MODES = ("deterministic", "stochastic")


def from_mapping(cls, data: Optional[Dict[str, Any]], label: str):
    """Build dataclass ``cls`` from a config section, rejecting unknown keys."""
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"{label} section must be an object")
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"Unknown {label} keys: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, InvalidArgumentError) as e:
        raise ConfigurationError(f"Invalid {label}: {e}")


@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int = 5
    questions_per_round: int = 8
    marker_phi: float = 0.5
    piece_rate_round: float = 0.05
    piece_rate_final: float = 0.20
    bdm_price_cap: float = 1.60
    confidence_bonus: float = 0.10
    participation_fee: float = 1.00
    seconds_per_effort: float = 60.0
    timing_noise_sd: float = 10.0
    min_effort_seconds: float = 5.0
    bid_noise_sd: float = 0.0
    bid_basis: str = "final_test"

    def __post_init__(self) -> None:
        if self.rounds < 1 or self.questions_per_round < 1:
            raise ConfigurationError("rounds and questions_per_round must be at least 1")
        if not 0.0 < self.marker_phi <= 1.0:
            raise ConfigurationError(f"marker_phi must lie in (0, 1], got {self.marker_phi}")
        money = {
            "piece_rate_round": self.piece_rate_round,
            "piece_rate_final": self.piece_rate_final,
            "bdm_price_cap": self.bdm_price_cap,
            "confidence_bonus": self.confidence_bonus,
            "participation_fee": self.participation_fee,
        }
        negative = [name for name, value in money.items() if not value >= 0]
        if negative:
            raise ConfigurationError(f"Monetary values must be non-negative: {', '.join(negative)}")
        if self.piece_rate_final <= 0:
            raise ConfigurationError("piece_rate_final must be positive to price the final test")
        if abs(self.bdm_price_cap - self.questions_per_round * self.piece_rate_final) > 1e-9:
            raise ConfigurationError(
                f"bdm_price_cap {self.bdm_price_cap} must equal questions_per_round x piece_rate_final "
                f"= {self.questions_per_round * self.piece_rate_final}"
            )
        for name in ("seconds_per_effort", "timing_noise_sd", "min_effort_seconds", "bid_noise_sd"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.bid_basis not in BID_BASES:
            raise ConfigurationError(f"bid_basis must be one of {BID_BASES}, got '{self.bid_basis}'")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ExperimentConfig":
        return from_mapping(cls, data, "experiment")

    def snapshot(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PopulationSpec:
    """Distribution of synthetic subjects.

    Abilities are in correct-answer units. The overconfidence offset is
    added to the true ability to give the believed ability. Prior means
    about the marker shift with age and ethnicity through ``age_slope`` and
    ``white_shift``, which gives the demographic controls something to pick up.
    ``prior_sd`` sets how many rounds learning takes: at 0.04 the prior weighs
    about as much as one round's mark, so beliefs keep falling through round 5.
    """
    n_subjects: int = 189
    ability_mean: float = 3.75
    ability_sd: float = 0.8
    ability_min: float = 0.5
    overconfidence_mean: float = 2.45
    overconfidence_sd: float = 2.42
    believed_min: float = 0.5
    prior_mean: float = 0.5
    prior_mean_sd: float = 0.1
    prior_sd: float = 0.04
    age_slope: float = 0.004
    white_shift: float = 0.09
    share_male: float = 101 / 189
    share_white: float = 96 / 189
    age_bucket_shares: Tuple[float, ...] = (2 / 189, 145 / 189, 29 / 189, 13 / 189)
    age_bucket_edges: Tuple[Tuple[int, int], ...] = ((18, 20), (21, 35), (36, 50), (51, 70))

    def __post_init__(self) -> None:
        if self.n_subjects < 0:
            raise ConfigurationError(f"n_subjects must be non-negative, got {self.n_subjects}")
        for name in ("ability_sd", "overconfidence_sd", "prior_mean_sd", "prior_sd"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(f"{name} must be a non-negative number, got {value}")
        if self.ability_min <= 0 or self.believed_min <= 0:
            raise ConfigurationError("ability_min and believed_min must be positive")
        if not 0.0 < self.prior_mean <= 1.0:
            raise ConfigurationError(f"prior_mean must lie in (0, 1], got {self.prior_mean}")
        for name in ("share_male", "share_white"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        shares = tuple(float(s) for s in self.age_bucket_shares)
        edges = tuple(tuple(int(v) for v in pair) for pair in self.age_bucket_edges)
        if len(shares) != len(edges) or abs(sum(shares) - 1.0) > 1e-6 or min(shares) < 0:
            raise ConfigurationError("age_bucket_shares must be non-negative, sum to 1 and match the edges")
        if any(len(pair) != 2 or pair[0] > pair[1] for pair in edges):
            raise ConfigurationError("each age bucket needs (low, high) with low <= high")
        object.__setattr__(self, "age_bucket_shares", shares)
        object.__setattr__(self, "age_bucket_edges", edges)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "PopulationSpec":
        return from_mapping(cls, data, "population")

    def snapshot(self) -> Dict[str, Any]:
        data = asdict(self)
        data["age_bucket_shares"] = list(self.age_bucket_shares)
        data["age_bucket_edges"] = [list(pair) for pair in self.age_bucket_edges]
        return data


@dataclass(frozen=True)
class RoundRecord:
    subject_id: str
    round: int
    score: int
    mark: float
    bid: float
    implied_score: float
    phi_hat: float
    excluded: bool
    effort: float
    effort_seconds: float
    stated_score_r1: Optional[int] = None


@dataclass(frozen=True)
class PhiRecovery:
    phi_hat: float
    implied_score: float
    excluded: bool
    reason: Optional[str] = None


@dataclass(frozen=True)
class BdmOutcome:
    win: bool
    price: float


@dataclass(frozen=True)
class SubjectPayoff:
    subject_id: str
    round_earnings: float
    confidence_bonus: float
    bdm_round: int
    bdm_bid: float
    bdm_price: float
    bdm_win: bool
    bonus_test_score: int
    bonus_test_earnings: float
    participation_fee: float
    total: float


def classify_confidence(stated_score_round1: int, actual_score_round1: int,
                        questions: int = 8) -> str:
    for name, value in (("stated", stated_score_round1), ("actual", actual_score_round1)):
        if not 0 <= int(value) <= questions:
            raise InvalidArgumentError(f"{name} score must lie in 0..{questions}, got {value}")
    if stated_score_round1 > actual_score_round1:
        return OVERCONFIDENT
    return UNDERCONFIDENT


def optimal_bid(belief: BeliefGrid, believed_ability: float, tech: Technology,
                config: ExperimentConfig) -> float:
    """Truthful BDM bid: the money value of a fully marked test.

    With the ``final_test`` basis the subject prices the bonus test at the
    effort it would put in under full marking; with ``current_round`` it
    prices the test it just took at the effort its current belief induced.
    """
    phi = 1.0 if config.bid_basis == "final_test" else belief.mean()
    effort = optimal_effort(tech, believed_ability, phi)
    expected_correct = min(gross_score(tech, believed_ability, effort), config.questions_per_round)
    return float(np.clip(config.piece_rate_final * expected_correct, 0.0, config.bdm_price_cap))


def recover_phi(mark: float, bid: float, config: ExperimentConfig) -> PhiRecovery:
    """Marks received over the marks the subject expected at full marking."""
    if not bid >= 0:
        raise InvalidArgumentError(f"bid must be non-negative, got {bid}")
    implied = round(bid / config.piece_rate_final, 12)
    if implied == 0.0:
        return PhiRecovery(float("nan"), implied, True, "undefined")
    phi_hat = mark / implied
    if phi_hat > 1.0:
        return PhiRecovery(phi_hat, implied, True, "above_one")
    return PhiRecovery(phi_hat, implied, False)


def bdm_resolve(bid: float, rng: np.random.Generator, config: ExperimentConfig) -> BdmOutcome:
    """Uniform random price; the bidder buys at the price when bid >= price."""
    if not 0.0 <= bid <= config.bdm_price_cap:
        raise InvalidArgumentError(f"bid must lie in [0, {config.bdm_price_cap}], got {bid}")
    price = float(rng.uniform(0.0, config.bdm_price_cap))
    return BdmOutcome(win=bid >= price, price=price)


def bdm_expected_payoff(bid: float, valuation: float, config: ExperimentConfig) -> float:
    """Expected surplus of ``bid`` over the uniform price for a test worth ``valuation``."""
    bid = min(max(bid, 0.0), config.bdm_price_cap)
    return (valuation * bid - bid * bid / 2.0) / config.bdm_price_cap


def _draw_score(expected_correct: float, config: ExperimentConfig, rng: np.random.Generator,
                mode: str) -> int:
    q = config.questions_per_round
    if mode == "deterministic":
        return int(min(q, max(0, round(expected_correct))))
    p = min(1.0, max(0.0, expected_correct / q))
    return int(rng.binomial(q, p))


def run_round(agent: AgentProfile, belief: BeliefGrid, tech: Technology, config: ExperimentConfig,
              rng: np.random.Generator, round_index: int = 1, mode: str = "stochastic",
              stated_score_r1: Optional[int] = None) -> Tuple[RoundRecord, BeliefGrid]:
    """Play one round: effort, score, mark, bid, then update on the mark."""
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got '{mode}'")
    stochastic = mode == "stochastic"
    phi_point = belief.mean()
    effort = optimal_effort(tech, agent.believed_ability, phi_point)
    score = _draw_score(gross_score(tech, agent.true_ability, effort), config, rng, mode)
    mark = score * config.marker_phi

    seconds = config.seconds_per_effort * effort
    if stochastic:
        seconds += float(rng.normal(0.0, config.timing_noise_sd))
    seconds = max(config.min_effort_seconds, seconds)

    bid = optimal_bid(belief, agent.believed_ability, tech, config)
    if stochastic and config.bid_noise_sd > 0:
        bid = float(np.clip(bid + rng.normal(0.0, config.bid_noise_sd), 0.0, config.bdm_price_cap))
    recovery = recover_phi(mark, bid, config)

    if effort > 0.0:
        if stochastic:
            belief = bayes_update(belief, tech, agent.believed_ability, effort, mark)
        else:
            # unrounded mark channel, so a point-mass posterior stays put
            observed = config.marker_phi * gross_score(tech, agent.true_ability, effort)
            belief = bayes_update(belief, replace(tech, noise_sigma=0.0), agent.believed_ability, effort, observed)

    record = RoundRecord(
        subject_id=agent.id,
        round=round_index,
        score=score,
        mark=mark,
        bid=bid,
        implied_score=recovery.implied_score,
        phi_hat=recovery.phi_hat,
        excluded=recovery.excluded,
        effort=effort,
        effort_seconds=seconds,
        stated_score_r1=stated_score_r1,
    )
    return record, belief


def stated_first_round_score(agent: AgentProfile, belief: BeliefGrid, tech: Technology,
                             config: ExperimentConfig) -> int:
    """Score the subject reports expecting after round 1: correct answers at a~."""
    effort = optimal_effort(tech, agent.believed_ability, belief.mean())
    expected = gross_score(tech, agent.believed_ability, effort)
    return int(min(config.questions_per_round, max(0, round(expected))))


def settle_subject(records: Sequence[RoundRecord], agent: AgentProfile, tech: Technology,
                   config: ExperimentConfig, rng: np.random.Generator,
                   stated_score_r1: int) -> SubjectPayoff:
    """Round earnings, confidence bonus, and the randomly drawn BDM round."""
    if not records:
        raise InvalidArgumentError("cannot settle a subject without rounds")
    round_earnings = config.piece_rate_round * sum(r.mark for r in records)
    first = min(records, key=lambda r: r.round)
    bonus = config.confidence_bonus if stated_score_r1 == first.score else 0.0

    drawn = records[int(rng.integers(len(records)))]
    outcome = bdm_resolve(drawn.bid, rng, config)
    test_score = 0
    test_earnings = 0.0
    if outcome.win:
        effort = optimal_effort(tech, agent.believed_ability, 1.0)
        p = min(1.0, gross_score(tech, agent.true_ability, effort) / config.questions_per_round)
        test_score = int(rng.binomial(config.questions_per_round, p))
        test_earnings = config.piece_rate_final * test_score - outcome.price

    total = round_earnings + bonus + test_earnings + config.participation_fee
    return SubjectPayoff(
        subject_id=agent.id,
        round_earnings=round_earnings,
        confidence_bonus=bonus,
        bdm_round=drawn.round,
        bdm_bid=drawn.bid,
        bdm_price=outcome.price,
        bdm_win=outcome.win,
        bonus_test_score=test_score,
        bonus_test_earnings=test_earnings,
        participation_fee=config.participation_fee,
        total=total,
    )


@dataclass
class PanelDataset:
    rounds: pd.DataFrame
    payoffs: Optional[pd.DataFrame] = None

    def __post_init__(self) -> None:
        missing = [c for c in PANEL_COLUMNS if c not in self.rounds.columns]
        if missing:
            raise SchemaError(missing)
        keys = self.rounds[["subject_id", "round"]]
        if keys.duplicated().any():
            raise SchemaError(["unique (subject_id, round)"])
        for subject, group in self.rounds.groupby("subject_id", sort=False):
            observed = sorted(int(r) for r in group["round"])
            if observed != list(range(1, len(observed) + 1)):
                raise SchemaError([f"contiguous rounds for subject {subject}"])

    def retained(self) -> pd.DataFrame:
        """Records usable for analysis (phi_hat defined and at most one)."""
        return self.rounds.loc[~self.rounds["excluded"].astype(bool)].copy()

    def subjects(self) -> pd.DataFrame:
        cols = ["subject_id", "overconfident", "stated_score_r1", "male", "age", "white"]
        return self.rounds[cols].drop_duplicates("subject_id").reset_index(drop=True)

    def to_csv(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.rounds[PANEL_COLUMNS].to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        return path

    def payoffs_to_csv(self, path: str) -> str:
        frame = self.payoffs if self.payoffs is not None else pd.DataFrame(columns=PAYOFF_COLUMNS)
        frame[PAYOFF_COLUMNS].to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        return path

    @classmethod
    def from_csv(cls, path: str) -> "PanelDataset":
        if not os.path.exists(path):
            raise ConfigurationError(f"Panel file '{path}' not found")
        frame = pd.read_csv(path, dtype={"subject_id": str})
        missing = [c for c in PANEL_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(missing)
        return cls(frame)


def _empty_rounds() -> pd.DataFrame:
    return pd.DataFrame({c: pd.Series(dtype=object) for c in PANEL_COLUMNS})


def _draw_subject(spec: PopulationSpec, index: int, rng: np.random.Generator,
                  width: int) -> Tuple[AgentProfile, BeliefGrid, Dict[str, Any]]:
    ability = max(spec.ability_min, rng.normal(spec.ability_mean, spec.ability_sd))
    believed = max(spec.believed_min, ability + rng.normal(spec.overconfidence_mean, spec.overconfidence_sd))
    male = int(rng.random() < spec.share_male)
    white = int(rng.random() < spec.share_white)
    shares = np.asarray(spec.age_bucket_shares)
    bucket = int(rng.choice(len(shares), p=shares / shares.sum()))
    low, high = spec.age_bucket_edges[bucket]
    age = int(rng.integers(low, high + 1))

    prior_mean = (spec.prior_mean
                  + spec.age_slope * (age - 30)
                  + spec.white_shift * (white - spec.share_white)
                  + rng.normal(0.0, spec.prior_mean_sd))
    prior_mean = float(np.clip(prior_mean, 0.05, 0.95))
    if spec.prior_sd == 0:
        prior = BeliefGrid.point_mass(prior_mean)
    else:
        prior = init_prior("truncated_normal", prior_mean, spec.prior_sd)

    agent = AgentProfile(true_ability=ability, believed_ability=believed, id=f"s{index + 1:0{width}d}")
    return agent, prior, {"male": male, "age": age, "white": white}


def simulate_subject(agent: AgentProfile, prior: BeliefGrid, tech: Technology, config: ExperimentConfig,
                     rng: np.random.Generator, mode: str = "stochastic") -> Tuple[List[RoundRecord], int]:
    """All rounds for one subject; returns the records and the stated round-1 score."""
    stated = stated_first_round_score(agent, prior, tech, config)
    belief = prior
    records = []
    for t in range(1, config.rounds + 1):
        record, belief = run_round(agent, belief, tech, config, rng, round_index=t, mode=mode,
                                   stated_score_r1=stated)
        records.append(record)
    return records, stated


def generate_panel(population_spec: PopulationSpec, config: ExperimentConfig, seed: int,
                   tech: Optional[Technology] = None, mode: str = "stochastic") -> PanelDataset:
    """Synthetic panel: one independent seed stream per subject."""
    if not isinstance(population_spec, PopulationSpec):
        raise ConfigurationError("population_spec must be a PopulationSpec")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got '{mode}'")
    tech = tech or Technology()
    width = max(3, len(str(population_spec.n_subjects)))
    rows: List[Dict[str, Any]] = []
    payoffs: List[Dict[str, Any]] = []

    for index in range(population_spec.n_subjects):
        agent, prior, demographics = _draw_subject(population_spec, index, seeding.stream(seed, index, 0), width)
        records, stated = simulate_subject(agent, prior, tech, config, seeding.stream(seed, index, 1), mode)
        overconfident = classify_confidence(stated, records[0].score, config.questions_per_round) == OVERCONFIDENT
        for record in records:
            rows.append({
                "subject_id": record.subject_id,
                "round": record.round,
                "score": record.score,
                "mark": record.mark,
                "bid": record.bid,
                "phi_hat": record.phi_hat,
                "effort_seconds": record.effort_seconds,
                "overconfident": int(overconfident),
                "stated_score_r1": stated,
                "male": demographics["male"],
                "age": demographics["age"],
                "white": demographics["white"],
                "excluded": int(record.excluded),
            })
        payoff = settle_subject(records, agent, tech, config, seeding.stream(seed, index, 2), stated)
        payoffs.append(asdict(payoff))

    frame = pd.DataFrame(rows, columns=PANEL_COLUMNS) if rows else _empty_rounds()
    excluded = int(frame["excluded"].astype(int).sum()) if rows else 0
    if excluded:
        logger.info("excluded %d of %d records with undefined or above-one phi_hat", excluded, len(frame))
    return PanelDataset(frame, pd.DataFrame(payoffs, columns=PAYOFF_COLUMNS))
