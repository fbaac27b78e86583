"""SVG charts for trajectories, belief densities, group means, clusters and confidence."""

import logging
import os
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from econometrics.density import kde  # noqa: E402
from errors import InvalidArgumentError  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt so element ids, and with them the SVG bytes, repeat across runs
plt.rcParams["svg.hashsalt"] = "mllab"
plt.rcParams["svg.fonttype"] = "none"

GROUP_COLORS = {"Overconfident": "tab:blue", "Underconfident": "tab:red"}
TRUTH_COLOR = "green"


def _save(out_path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    plt.tight_layout()
    plt.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close()
    return out_path


def _groups(panel: pd.DataFrame) -> pd.Series:
    return pd.Series(np.where(panel["overconfident"].astype(int) == 1, "Overconfident", "Underconfident"),
                     index=panel.index)


def plot_belief_paths(trajectories: pd.DataFrame, phi_true: float, out_path: str,
                      column: str = "phi_point", max_agents: int = 50,
                      title: str = "Belief paths") -> str:
    """One line per agent with the true marker value as a horizontal line."""
    plt.figure(figsize=(8, 5))
    agent_ids = sorted(trajectories["agent_id"].unique())[:max_agents]
    for agent_id in agent_ids:
        path = trajectories.loc[trajectories["agent_id"] == agent_id].sort_values("round")
        plt.plot(path["round"], path[column], marker="o", linewidth=1, markersize=3, alpha=0.7)
    plt.axhline(phi_true, color=TRUTH_COLOR, linewidth=2, label="True value")
    plt.xlabel("Round")
    plt.ylabel("Belief about the marker")
    plt.ylim(0, 1.05)
    plt.title(title)
    plt.legend(loc="upper right")
    plt.grid(alpha=0.3)
    return _save(out_path)


def plot_kde_by_round(panel: pd.DataFrame, out_path: str, marker_phi: float,
                      rounds: Optional[Sequence[int]] = None, column: str = "phi_hat") -> str:
    """Kernel densities of beliefs per round, overconfident in blue, underconfident in red."""
    data = panel.dropna(subset=[column])
    rounds = list(rounds) if rounds is not None else sorted(int(r) for r in data["round"].unique())
    if not rounds:
        raise InvalidArgumentError("no rounds to plot")
    groups = _groups(data)

    fig, axes = plt.subplots(1, len(rounds), figsize=(3.2 * len(rounds), 3.6), sharey=True, squeeze=False)
    for ax, r in zip(axes[0], rounds):
        for group, color in GROUP_COLORS.items():
            values = data.loc[(data["round"] == r) & (groups == group), column].astype(float)
            if len(values) < 2 or values.nunique() < 2:
                logger.info("plot_kde_by_round: skipped %s round %d (%d values)", group, r, len(values))
                continue
            curve = kde(values.to_numpy())
            ax.plot(curve.grid, curve.density, color=color, label=group)
        ax.axvline(marker_phi, color=TRUTH_COLOR, linewidth=1.5)
        ax.set_title(f"Round {r}")
        ax.set_xlabel("Phi")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("Density")
    axes[0][0].legend(loc="upper left", fontsize=8)
    return _save(out_path)


def mean_band_frame(panel: pd.DataFrame, column: str = "phi_hat") -> pd.DataFrame:
    """Mean and sd of ``column`` per round and confidence group."""
    data = panel.dropna(subset=[column]).assign(group=lambda d: _groups(d))
    summary = data.groupby(["group", "round"])[column].agg(["mean", "std", "size"]).reset_index()
    summary["std"] = summary["std"].fillna(0.0)
    summary["lower"] = summary["mean"] - 2.0 * summary["std"]
    summary["upper"] = summary["mean"] + 2.0 * summary["std"]
    return summary


def plot_mean_band(panel: pd.DataFrame, out_path: str, marker_phi: float,
                   column: str = "phi_hat") -> Tuple[str, pd.DataFrame]:
    """Mean belief per round with a band of two standard deviations."""
    summary = mean_band_frame(panel, column)
    plt.figure(figsize=(8, 5))
    for group, color in GROUP_COLORS.items():
        block = summary.loc[summary["group"] == group]
        if block.empty:
            continue
        plt.plot(block["round"], block["mean"], color=color, marker="o", label=group)
        plt.fill_between(block["round"], block["lower"], block["upper"], color=color, alpha=0.15)
    plt.axhline(marker_phi, color=TRUTH_COLOR, linewidth=1.5, label="True value")
    plt.xlabel("Round")
    plt.ylabel("Mean belief")
    plt.title("Mean belief by round (shaded: 2 s.d.)")
    plt.legend()
    plt.grid(alpha=0.3)
    return _save(out_path), summary


def plot_clusters(points: np.ndarray, labels: np.ndarray, out_path: str,
                  axis_labels: Tuple[str, str] = ("Mark", "Phi"), title: str = "Clusters") -> str:
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    plt.figure(figsize=(7, 6))
    colors = plt.cm.tab10(np.linspace(0, 1, 10))
    for cluster in np.unique(labels):
        members = points[labels == cluster]
        plt.scatter(members[:, 0], members[:, 1], s=18, color=colors[cluster % 10],
                    label=f"Cluster {cluster + 1} ({len(members)})")
    plt.xlabel(axis_labels[0])
    plt.ylabel(axis_labels[1])
    plt.title(title)
    plt.legend(fontsize=8)
    plt.grid(alpha=0.3)
    return _save(out_path)


def plot_confidence(panel: pd.DataFrame, out_path: str, questions: int = 8) -> str:
    """Stated against actual round-1 scores, and the distribution of their difference."""
    first = panel.loc[panel["round"] == 1]
    stated = first["stated_score_r1"].astype(int)
    actual = first["score"].astype(int)
    bins = np.arange(-0.5, questions + 1.5, 1.0)

    fig, axes = plt.subplots(1, 2, figsize=(12, 5))
    axes[0].hist([stated, actual], bins=bins, label=["Stated", "Actual"], color=["tab:orange", "tab:gray"])
    axes[0].set_xlabel("Round 1 score")
    axes[0].set_ylabel("Subjects")
    axes[0].set_title("Stated and actual scores")
    axes[0].legend()
    gap = stated - actual
    gap_bins = np.arange(-questions - 0.5, questions + 1.5, 1.0)
    axes[1].hist(gap, bins=gap_bins, color="tab:purple")
    axes[1].axvline(0, color="black", linewidth=1)
    axes[1].set_xlabel("Stated minus actual")
    axes[1].set_title("Overconfidence")
    for ax in axes:
        ax.grid(axis="y", alpha=0.3)
    return _save(out_path)


def plot_scores_by_round(panel: pd.DataFrame, out_path: str) -> str:
    data = panel.assign(group=lambda d: _groups(d))
    summary = data.groupby(["group", "round"])["score"].mean().reset_index()
    plt.figure(figsize=(8, 5))
    for group, color in GROUP_COLORS.items():
        block = summary.loc[summary["group"] == group]
        if not block.empty:
            plt.plot(block["round"], block["score"], color=color, marker="o", label=group)
    plt.xlabel("Round")
    plt.ylabel("Mean score")
    plt.title("Mean score by round")
    plt.legend()
    plt.grid(alpha=0.3)
    return _save(out_path)
