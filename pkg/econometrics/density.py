"""Gaussian kernel density estimates for the per-round belief figures."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import iqr, norm

from errors import InvalidArgumentError

GRID_POINTS = 512
GRID_PAD = 4.0


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n: int

    def integral(self) -> float:
        return float(trapezoid(self.density, self.grid))


def silverman_bandwidth(values) -> float:
    """h = 0.9 * min(sd, IQR/1.34) * n^(-1/5); falls back to sd when the IQR is zero."""
    values = np.asarray(values, dtype=float)
    sd = float(values.std(ddof=1))
    spread = float(iqr(values)) / 1.34
    scale = min(sd, spread) if spread > 0 else sd
    if scale <= 0:
        raise InvalidArgumentError("silverman bandwidth is zero for a constant sample; pass a fixed bandwidth")
    return 0.9 * scale * len(values) ** (-0.2)


def kde(values, bandwidth: Union[str, float] = "silverman", grid: Optional[np.ndarray] = None,
        grid_points: int = GRID_POINTS) -> KdeCurve:
    values = np.asarray(values, dtype=float).ravel()
    if len(values) < 2:
        raise InvalidArgumentError(f"kde needs at least 2 values, got {len(values)}")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("kde values must be finite")

    if bandwidth == "silverman":
        h = silverman_bandwidth(values)
    elif isinstance(bandwidth, str):
        raise InvalidArgumentError(f"unknown bandwidth rule '{bandwidth}'")
    else:
        h = float(bandwidth)
        if not np.isfinite(h) or h <= 0:
            raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")

    if grid is None:
        grid = np.linspace(values.min() - GRID_PAD * h, values.max() + GRID_PAD * h, grid_points)
    else:
        grid = np.asarray(grid, dtype=float)

    density = norm.pdf((grid[:, None] - values[None, :]) / h).sum(axis=1) / (len(values) * h)
    return KdeCurve(grid=grid, density=density, bandwidth=h, n=len(values))
