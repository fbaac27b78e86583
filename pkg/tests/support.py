"""Path setup and synthetic panels shared by the test modules."""

import os
import sys

import numpy as np
import pandas as pd

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def ensure_project_on_path() -> str:
    if ROOT not in sys.path:
        sys.path.insert(0, ROOT)
    return ROOT


ensure_project_on_path()

from protocol import PANEL_COLUMNS  # noqa: E402


def ar_panel(n_subjects: int, rounds: int, beta: float, gamma: float, seed: int = 0,
             effect_sd: float = 1.0, noise_sd: float = 1.0) -> pd.DataFrame:
    """y_it = a_i + beta * t + gamma * y_i,t-1 + u_it with effort driven by the previous belief."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_subjects):
        effect = rng.normal(0.0, effect_sd)
        y_prev = effect / (1.0 - gamma) + rng.normal(0.0, noise_sd / np.sqrt(1.0 - gamma ** 2))
        for t in range(1, rounds + 1):
            effort = 60.0 * y_prev + rng.normal(0.0, 5.0)
            y = effect + beta * t + gamma * y_prev + rng.normal(0.0, noise_sd)
            rows.append({"subject_id": f"s{i:04d}", "round": t, "phi_hat": y, "effort_seconds": effort})
            y_prev = y
    return pd.DataFrame(rows)


def synthetic_panel(n_subjects: int = 60, rounds: int = 5, seed: int = 0) -> pd.DataFrame:
    """Panel in the CSV schema: first half overconfident with falling beliefs, second half underconfident."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_subjects):
        overconfident = int(i < n_subjects // 2)
        phi = float(rng.uniform(0.3, 0.9))
        first_score = None
        for t in range(1, rounds + 1):
            drift = -0.03 if overconfident else 0.0
            phi = float(np.clip(0.15 + drift * t + 0.6 * phi + rng.normal(0.0, 0.08), 0.02, 1.0))
            score = int(rng.integers(1, 9))
            if first_score is None:
                first_score = score
            mark = score * 0.5
            bid = round(min(1.6, 0.2 * mark / phi), 6)
            if overconfident:
                stated = min(8, first_score + 2)
            else:
                stated = max(0, first_score - (i % 2))
            rows.append({
                "subject_id": f"s{i + 1:03d}",
                "round": t,
                "score": score,
                "mark": mark,
                "bid": bid,
                "phi_hat": phi,
                "effort_seconds": max(5.0, 120.0 - 10.0 * overconfident * t + rng.normal(0.0, 10.0)),
                "overconfident": overconfident,
                "stated_score_r1": stated,
                "male": i % 2,
                "age": 20 + (i * 7) % 23,
                "white": (i // 3) % 2,
                "excluded": 0,
            })
    return pd.DataFrame(rows, columns=PANEL_COLUMNS)


def two_cluster_panel(n_subjects: int = 60, seed: int = 0) -> pd.DataFrame:
    """Overconfident subjects whose (mark, phi_hat) points sit in two tight groups."""
    rng = np.random.default_rng(seed)
    frame = synthetic_panel(n_subjects, 5, seed)
    frame["overconfident"] = 1
    low = frame["subject_id"].map(lambda s: int(s[1:]) % 2 == 0)
    frame["mark"] = 2.0 + rng.normal(0.0, 0.03, len(frame))
    frame["phi_hat"] = np.where(low, 0.2, 0.8) + rng.normal(0.0, 0.03, len(frame))
    return frame
