"""Paired one-sided t-tests across rounds and the dispersion measures they run on."""

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from errors import DegenerateTestError, InvalidArgumentError
from econometrics.distributions import student_t_cdf, student_t_sf

ALTERNATIVES = ("less", "greater")
TARGET_MODES = ("sq_dev_from_round_mean", "abs_dev", "sq_dev_from_truth")


@dataclass(frozen=True)
class TTestResult:
    mean_difference: float
    t_stat: float
    df: int
    p_value: float
    alternative: str

    def format(self, digits: int = 3) -> str:
        return f"({self.mean_difference:.{digits}f}, p-value: {self.p_value:.{digits}f})"


def paired_t_one_sided(before, after, alternative: str = "less") -> TTestResult:
    """One-sided test on the paired differences ``after - before``.

    ``less`` tests whether the mean difference is negative, ``greater``
    whether it is positive.
    """
    if alternative not in ALTERNATIVES:
        raise InvalidArgumentError(f"alternative must be one of {ALTERNATIVES}, got '{alternative}'")
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    if before.shape != after.shape or before.ndim != 1:
        raise InvalidArgumentError("before and after must be 1-D and of equal length")
    n = len(before)
    if n < 2:
        raise InvalidArgumentError(f"paired t-test needs at least 2 pairs, got {n}")

    differences = after - before
    mean = float(differences.mean())
    sd = float(differences.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 0.0, df, 0.5, alternative)
        raise DegenerateTestError(f"paired differences are constant at {mean:.6g}")

    t_stat = mean / (sd / math.sqrt(n))
    if alternative == "less":
        p_value = student_t_cdf(t_stat, df)
    else:
        p_value = student_t_sf(t_stat, df)
    return TTestResult(mean, t_stat, df, p_value, alternative)


def variance_target(panel: pd.DataFrame, phi_col: str = "phi_hat", mode: str = "sq_dev_from_round_mean",
                    truth: Optional[float] = None, by: str = "round") -> pd.Series:
    """Per-record dispersion of beliefs, aligned with ``panel``'s index.

    sq_dev_from_round_mean: (phi - mean of phi in the round)^2
    abs_dev:                |phi - mean of phi in the round|
    sq_dev_from_truth:      (phi - truth)^2
    """
    if mode not in TARGET_MODES:
        raise InvalidArgumentError(f"mode must be one of {TARGET_MODES}, got '{mode}'")
    phi = panel[phi_col].astype(float)
    if mode == "sq_dev_from_truth":
        if truth is None:
            raise InvalidArgumentError("sq_dev_from_truth needs the true marker value")
        target = (phi - truth) ** 2
    else:
        deviation = phi - phi.groupby(panel[by]).transform("mean")
        target = deviation ** 2 if mode == "sq_dev_from_round_mean" else deviation.abs()
    return target.rename(f"{phi_col}_{mode}")


def round_pair_ttests(panel: pd.DataFrame, value_col: str, base_round: int = 1,
                      rounds: Optional[Iterable[int]] = None, alternative: str = "less",
                      subject: str = "subject_id", time: str = "round") -> pd.DataFrame:
    """Compare every later round with ``base_round`` on subjects observed in both.

    Degenerate comparisons are reported in the ``error`` column instead of raising.
    """
    wide = panel.pivot_table(index=subject, columns=time, values=value_col, aggfunc="first")
    if rounds is None:
        rounds = [r for r in sorted(wide.columns) if r != base_round]
    rows = []
    for later in rounds:
        row = {"base_round": base_round, "round": int(later), "n": 0, "mean_difference": np.nan,
               "t": np.nan, "df": np.nan, "p_value": np.nan, "formatted": "", "error": ""}
        if base_round not in wide.columns or later not in wide.columns:
            row["error"] = "round not observed"
            rows.append(row)
            continue
        pairs = wide[[base_round, later]].dropna()
        row["n"] = len(pairs)
        try:
            result = paired_t_one_sided(pairs[base_round], pairs[later], alternative)
        except (DegenerateTestError, InvalidArgumentError) as e:
            row["error"] = str(e)
        else:
            row.update({
                "mean_difference": result.mean_difference,
                "t": result.t_stat,
                "df": result.df,
                "p_value": result.p_value,
                "formatted": result.format(),
            })
        rows.append(row)
    return pd.DataFrame(rows, columns=["base_round", "round", "n", "mean_difference", "t", "df",
                                       "p_value", "formatted", "error"])
