"""
The study's tables computed from a panel: which subsample, which estimator,
which dependent variable. Each builder returns a TableOutput holding the
printed table and a CSV-ready frame.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from econometrics import (
    diff_gmm,
    hausman,
    ols,
    random_effects,
    round_pair_ttests,
    variance_target,
    within_fe,
)
from econometrics.tables import (
    descriptive_table,
    descriptive_text,
    gmm_frame,
    gmm_table,
    regression_table,
    results_frame,
    ttest_text,
)
from errors import MllabError
from protocol import PanelDataset
from scenario import Scenario

logger = logging.getLogger(__name__)

TABLES = ("table1", "table2", "table3", "table4", "table5", "ttests", "learning_effects", "robustness")
DISPERSION = "phi_dispersion"


@dataclass
class TableOutput:
    name: str
    text: str
    frame: pd.DataFrame


def _group(frame: pd.DataFrame, overconfident: bool) -> pd.DataFrame:
    return frame.loc[frame["overconfident"].astype(int) == int(overconfident)].copy()


def _with_dispersion(frame: pd.DataFrame, mode: str = "sq_dev_from_round_mean",
                     truth: Optional[float] = None) -> pd.DataFrame:
    out = frame.copy()
    out[DISPERSION] = variance_target(out, "phi_hat", mode=mode, truth=truth)
    return out


def table1(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    frame = descriptive_table(dataset.rounds, scenario.experiment.piece_rate_final)
    return TableOutput("table1", descriptive_text(frame), frame)


def table2(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    """Round-1 belief on the overconfidence dummy, without and with demographic controls."""
    first = dataset.retained()
    first = first.loc[first["round"] == 1]
    controls = list(scenario.estimate.controls)
    results = [
        ols(first["phi_hat"], first[["overconfident"]]),
        ols(first["phi_hat"], first[["overconfident"] + controls]),
    ]
    text = regression_table(results, "The difference between overconfident and underconfident beliefs")
    return TableOutput("table2", text, results_frame(results))


def table3(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    """Effort on round by group, then pooled with the round x overconfident interaction."""
    data = dataset.rounds.copy()
    data["round_x_overconfident"] = data["round"] * data["overconfident"].astype(int)
    names = ["Overconfident", "Underconfident", "Pooled"]
    results = [
        random_effects(_group(data, True), "effort_seconds", ["round"]),
        random_effects(_group(data, False), "effort_seconds", ["round"]),
        random_effects(data, "effort_seconds", ["round", "overconfident", "round_x_overconfident"]),
    ]
    text = regression_table(results, "The effect of updating on effort provision", names)
    return TableOutput("table3", text, results_frame(results, names))


def _gmm_columns(frame: pd.DataFrame, dep: str, scenario: Scenario):
    specs = scenario.estimate.gmm_specs
    results = [diff_gmm(frame, dep=dep, instruments=spec) for spec in specs]
    names = [f"({i + 1})" for i in range(len(specs))]
    return results, names


def table4(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    over = _group(dataset.retained(), True)
    results, names = _gmm_columns(over, "phi_hat", scenario)
    text = gmm_table(results, "Structural models of updating: overconfident subjects", "Phi", names)
    return TableOutput("table4", text, gmm_frame(results, names))


def table5(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    under = _with_dispersion(_group(dataset.retained(), False))
    results, names = _gmm_columns(under, DISPERSION, scenario)
    text = gmm_table(results, "Structural models of updating: underconfident subjects' belief dispersion",
                     "Dispersion", names)
    return TableOutput("table5", text, gmm_frame(results, names))


def _ttest_block(frame: pd.DataFrame, value_col: str, label: str, base_round: int) -> Tuple[str, pd.DataFrame]:
    tests = round_pair_ttests(frame, value_col, base_round=base_round, alternative="less")
    tests.insert(0, "test", label)
    failed = tests.loc[tests["error"] != ""]
    for _, row in failed.iterrows():
        logger.warning("%s round %d: %s", label, row["round"], row["error"])
    return ttest_text(tests.drop(columns="test"), label), tests


def ttests(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    retained = dataset.retained()
    base = scenario.estimate.base_round
    blocks = [
        _ttest_block(_group(retained, True), "phi_hat", "Overconfident beliefs fall", base),
        _ttest_block(_with_dispersion(_group(retained, False)), DISPERSION,
                     "Underconfident dispersion falls", base),
    ]
    return TableOutput("ttests", "\n\n".join(b[0] for b in blocks),
                       pd.concat([b[1] for b in blocks], ignore_index=True))


def robustness(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    """Dispersion t-tests and structural models under the alternative measures
    and for the strictly underconfident.

    Each measure contributes a t-test block and a difference GMM table; the
    frame stacks both, keyed by the ``test`` column.
    """
    retained = dataset.retained()
    under = _group(retained, False)
    base = scenario.estimate.base_round
    truth = scenario.experiment.marker_phi
    strictly = under.loc[under["stated_score_r1"].astype(int) < _first_round_score(dataset.rounds, under)]
    measures = [
        ("Absolute deviation from round mean", _with_dispersion(under, "abs_dev")),
        ("Squared deviation from the true marker", _with_dispersion(under, "sq_dev_from_truth", truth)),
        ("Strictly underconfident subjects", _with_dispersion(strictly)),
    ]
    texts, frames = [], []
    for label, frame in measures:
        text, tests = _ttest_block(frame, DISPERSION, label, base)
        results, names = _gmm_columns(frame, DISPERSION, scenario)
        gmm = gmm_frame(results, names)
        gmm.insert(0, "test", label)
        texts += [text, gmm_table(results, f"Structural models of updating: {label.lower()}", "Dispersion", names)]
        frames += [tests, gmm]
    return TableOutput("robustness", "\n\n".join(texts), pd.concat(frames, ignore_index=True))


def _first_round_score(rounds: pd.DataFrame, frame: pd.DataFrame) -> pd.Series:
    scores = rounds.loc[rounds["round"] == 1].set_index("subject_id")["score"].astype(int)
    return frame["subject_id"].map(scores)


def learning_effects(dataset: PanelDataset, scenario: Scenario) -> TableOutput:
    """Score on round with subject effects, fixed and random, plus the Hausman test per group."""
    results, names, lines, rows = [], [], [], []
    for label, overconfident in (("Overconfident", True), ("Underconfident", False)):
        group = _group(dataset.rounds, overconfident)
        fe = within_fe(group, "score", ["round"])
        re = random_effects(group, "score", ["round"])
        test = hausman(fe, re)
        results += [fe, re]
        names += [f"{label} FE", f"{label} RE"]
        lines.append(f"Hausman test ({label}): chi2({test.df}) = {test.statistic:.3f}, p = {test.p_value:.3f}"
                     + (" [pseudo-inverse]" if test.used_pseudo_inverse else ""))
        rows.append({"model": f"{label} Hausman", "term": "round", "coefficient": test.statistic,
                     "p": test.p_value, "df": int(test.df)})
    text = regression_table(results, "Learning effects on scores", names) + "\n" + "\n".join(lines)
    frame = pd.concat([results_frame(results, names), pd.DataFrame(rows)], ignore_index=True)
    return TableOutput("learning_effects", text, frame)


BUILDERS: Dict[str, Callable[[PanelDataset, Scenario], TableOutput]] = {
    "table1": table1,
    "table2": table2,
    "table3": table3,
    "table4": table4,
    "table5": table5,
    "ttests": ttests,
    "learning_effects": learning_effects,
    "robustness": robustness,
}


def build_tables(dataset: PanelDataset, scenario: Scenario,
                 which: Sequence[str]) -> Tuple[List[TableOutput], List[Tuple[str, MllabError]]]:
    """Run each requested table; estimator failures are collected rather than raised."""
    outputs: List[TableOutput] = []
    failures: List[Tuple[str, MllabError]] = []
    for name in which:
        try:
            outputs.append(BUILDERS[name](dataset, scenario))
        except MllabError as e:
            logger.error("table=%s\terror=%s", name, e)
            failures.append((name, e))
    return outputs, failures
