"""Least-squares exponential-rate fits for convergence histories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class FitError(ValueError):
    """Not enough usable data points for a rate fit."""


@dataclass(frozen=True)
class RateFit:
    """Fitted model  log(y) = slope * x + intercept  with its R^2."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_log_decay(
    x: NDArray,
    y: NDArray,
    window: tuple[float, float] | None = None,
    min_points: int = 2,
) -> RateFit:
    """Fit log(y) linearly against x, optionally restricted to y inside
    ``window = (lo, hi)``.  Non-positive y values are always excluded."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y must have matching shapes")
    mask = np.isfinite(y) & (y > 0.0) & np.isfinite(x)
    if window is not None:
        lo, hi = window
        mask &= (y >= lo) & (y <= hi)
    xs, ys = x[mask], np.log(y[mask])
    if xs.size < min_points:
        raise FitError(
            f"only {xs.size} points available for the rate fit (need {min_points})"
        )
    slope, intercept = np.polyfit(xs, ys, 1)
    fitted = slope * xs + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r2),
        n_points=int(xs.size),
    )
