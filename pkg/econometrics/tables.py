"""Plain-text and CSV renderings of estimation results."""

import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from econometrics.dynamic_panel import GmmResult
from econometrics.linear import RegressionResult

RULE_WIDTH = 80
LABEL_WIDTH = 28
COLUMN_WIDTH = 16

# term labels used in the printed tables
TERM_LABELS: Dict[str, str] = {
    "const": "Constant",
    "round": "Round",
    "overconfident": "Overconfident",
    "round_x_overconfident": "Round x Overconfident",
    "male": "Male",
    "age": "Age",
    "white": "White",
    "phi_hat": "Phi",
    "score": "Score",
}


def stars(p: float) -> str:
    if p is None or not np.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def _number(value: Optional[float], digits: int) -> str:
    if value is None or not np.isfinite(value):
        return "n/a"
    return f"{value:.{digits}f}"


def _row(label: str, cells: Sequence[str]) -> str:
    return f"{label:<{LABEL_WIDTH}}" + "".join(f"{c:>{COLUMN_WIDTH}}" for c in cells)


def _header(title: str, column_names: Sequence[str], dependent: Optional[str]) -> List[str]:
    lines = ["=" * RULE_WIDTH, title]
    if dependent:
        lines.append(f"Dependent variable: {dependent}")
    lines.append("-" * RULE_WIDTH)
    lines.append(_row("", column_names))
    lines.append("-" * RULE_WIDTH)
    return lines


def _footer(lines: List[str], note: str) -> str:
    lines.append("=" * RULE_WIDTH)
    lines.append(note)
    return "\n".join(lines)


def regression_table(results: Sequence[RegressionResult], title: str,
                     column_names: Optional[Sequence[str]] = None, digits: int = 3) -> str:
    """Coefficients with stars over standard errors in brackets, one column per model."""
    column_names = list(column_names or [f"({i + 1})" for i in range(len(results))])
    dependent = results[0].dependent if results else None
    lines = _header(title, column_names, dependent)

    terms: List[str] = []
    for result in results:
        terms.extend(name for name in result.names if name not in terms)
    # constant last, as in the printed tables
    terms.sort(key=lambda name: name == "const")

    for term in terms:
        coefficient_cells, error_cells = [], []
        for result in results:
            if term in result.names:
                coefficient_cells.append(
                    _number(result.coef(term), digits) + stars(result.pvalue(term)))
                error_cells.append(f"({_number(result.se(term), digits)})")
            else:
                coefficient_cells.append("")
                error_cells.append("")
        lines.append(_row(TERM_LABELS.get(term, term), coefficient_cells))
        lines.append(_row("", error_cells))

    lines.append("-" * RULE_WIDTH)
    lines.append(_row("Method", [r.method for r in results]))
    lines.append(_row("N", [str(r.n_obs) for r in results]))
    lines.append(_row("R-squared", [_number(r.r_squared, digits) for r in results]))
    return _footer(lines, "Standard errors in brackets. *** p<0.01, ** p<0.05, * p<0.1")


def gmm_table(results: Sequence[GmmResult], title: str, dependent: str = "Phi",
              column_names: Optional[Sequence[str]] = None, digits: int = 3) -> str:
    column_names = list(column_names or [f"({i + 1})" for i in range(len(results))])
    lines = _header(title, column_names, dependent)
    lines.append(_row("Round", [_number(r.beta, digits) + stars(r.beta_p) for r in results]))
    lines.append(_row("", [f"({_number(r.beta_se, digits)})" for r in results]))
    lines.append(_row(f"{dependent} (t-1)", [_number(r.gamma, digits) + stars(r.gamma_p) for r in results]))
    lines.append(_row("", [f"({_number(r.gamma_se, digits)})" for r in results]))
    lines.append("-" * RULE_WIDTH)
    lines.append(_row("Sargan test", [_number(r.sargan_j, digits) for r in results]))
    lines.append(_row("", [f"[{_number(r.sargan_p, digits)}]" for r in results]))
    lines.append(_row("First-stage F", [_number(r.first_stage_f, 2) for r in results]))
    lines.append(_row("Autocorrelation m1", [f"{_number(r.ar1_stat, 2)} [{_number(r.ar1_p, 2)}]" for r in results]))
    lines.append(_row("Autocorrelation m2", [f"{_number(r.ar2_stat, 2)} [{_number(r.ar2_p, 2)}]" for r in results]))
    lines.append(_row("Instruments", [" + ".join(_instrument_label(i) for i in r.instruments) for r in results]))
    lines.append(_row("N", [str(r.n_obs) for r in results]))
    return _footer(lines, "Standard errors in brackets, p-values in square brackets. "
                          "*** p<0.01, ** p<0.05, * p<0.1")


def _instrument_label(name: str) -> str:
    return {"lag_effort": "dEffort(t-1)", "lag2_dep": "Level(t-2)"}.get(name, name)


def results_frame(results: Sequence[RegressionResult], column_names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Long-format coefficient table for CSV output."""
    column_names = list(column_names or [f"({i + 1})" for i in range(len(results))])
    frames = []
    for name, result in zip(column_names, results):
        frame = result.to_frame().reset_index()
        frame.insert(0, "model", name)
        frame["stars"] = [stars(p) for p in frame["p"]]
        frame["method"] = result.method
        frame["n_obs"] = result.n_obs
        frame["r_squared"] = result.r_squared
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["model", "term", "coefficient", "std_error", "t", "p", "stars",
                                     "method", "n_obs", "r_squared"])
    return pd.concat(frames, ignore_index=True)


def gmm_frame(results: Sequence[GmmResult], column_names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    column_names = list(column_names or [f"({i + 1})" for i in range(len(results))])
    rows = []
    for name, result in zip(column_names, results):
        row = {"model": name}
        row.update(result.to_dict())
        rows.append(row)
    return pd.DataFrame(rows)


def descriptive_table(panel: pd.DataFrame, piece_rate_final: float = 0.20) -> pd.DataFrame:
    """N, mean and sd of overconfidence, score, bid (as implied score) and phi, by group."""
    data = panel.copy()
    data["implied_score"] = data["bid"].astype(float) / piece_rate_final
    data["group"] = np.where(data["overconfident"].astype(int) == 1, "Overconfident", "Underconfident")
    first = data.loc[data["round"] == 1].copy()
    first["overconfidence"] = first["stated_score_r1"].astype(float) - first["score"].astype(float)
    retained = data.loc[~data["excluded"].astype(bool)]

    sources = [
        ("Overconfidence", first, "overconfidence"),
        ("Score", data, "score"),
        ("Bid (implied score)", data, "implied_score"),
        ("Phi", retained, "phi_hat"),
    ]
    rows = []
    for group in ("All", "Overconfident", "Underconfident"):
        for label, frame, column in sources:
            subset = frame if group == "All" else frame.loc[frame["group"] == group]
            values = subset[column].astype(float).dropna()
            rows.append({
                "group": group,
                "variable": label,
                "n": len(values),
                "mean": float(values.mean()) if len(values) else np.nan,
                "sd": float(values.std(ddof=1)) if len(values) > 1 else np.nan,
            })
    return pd.DataFrame(rows, columns=["group", "variable", "n", "mean", "sd"])


def descriptive_text(frame: pd.DataFrame, title: str = "Descriptive statistics", digits: int = 2) -> str:
    lines = ["=" * RULE_WIDTH, title, "-" * RULE_WIDTH]
    for group, block in frame.groupby("group", sort=False):
        lines.append(f"[{group}]")
        lines.append(_row("", ["N", "Mean", "S.d."]))
        for _, row in block.iterrows():
            lines.append(_row(row["variable"], [str(int(row["n"])), _number(row["mean"], digits),
                                                _number(row["sd"], digits)]))
    lines.append("=" * RULE_WIDTH)
    return "\n".join(lines)


def ttest_text(frame: pd.DataFrame, title: str) -> str:
    """One line per round pair in the (difference, p-value) format."""
    lines = ["=" * RULE_WIDTH, title, "-" * RULE_WIDTH]
    for _, row in frame.iterrows():
        label = f"Round {int(row['base_round'])} vs {int(row['round'])}"
        if row["error"]:
            lines.append(f"{label:<{LABEL_WIDTH}}not computed: {row['error']}")
        else:
            lines.append(f"{label:<{LABEL_WIDTH}}{row['formatted']}{stars(row['p_value'])}  n={int(row['n'])}")
    lines.append("=" * RULE_WIDTH)
    return "\n".join(lines)


def write_text(text: str, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")
    return path


def write_frame(frame: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
