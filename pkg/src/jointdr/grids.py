"""Threshold grids over the continuous outcome's support.

A grid is the finite set of cutoffs at which the binary threshold
regressions are fitted.  Grids built from empirical quantiles use the
inverse-CDF convention: the p-quantile of a sample of size n is the order
statistic at index ceil(p*n) (1-based), so the 100% point is exactly the
sample maximum.  Ties between neighbouring quantiles are deduplicated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def quantile_probs(step_pct: float = 1.0) -> np.ndarray:
    """Probabilities step_pct%, 2*step_pct%, ..., 100%."""
    n_steps = int(round(100.0 / step_pct))
    return np.arange(1, n_steps + 1) / n_steps


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing cutoff points, in the outcome's units."""

    points: np.ndarray
    source: str = "explicit"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "ThresholdGrid":
        return cls(np.asarray(points, dtype=float), source="explicit")

    @classmethod
    def from_quantiles(cls, values: Sequence[float], probs: Sequence[float]) -> "ThresholdGrid":
        """Empirical-quantile grid of ``values`` at ``probs``, deduplicated."""
        return cls(empirical_quantiles(values, probs), source="quantiles")


def empirical_quantiles(values, probs) -> np.ndarray:
    """Order statistics at indices ceil(p*n), deduplicated and increasing.

    ``probs`` must be strictly increasing and lie in (0, 1].  The index is
    computed as ceil(round(p*n, 9)) so that probabilities like k/100 hit the
    exact order statistic despite binary floating point.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("values must be non-empty")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0 or np.any(probs <= 0.0) or np.any(probs > 1.0):
        raise ValueError("probs must lie in (0, 1]")
    if probs.size > 1 and not np.all(np.diff(probs) > 0):
        raise ValueError("probs must be strictly increasing")
    srt = np.sort(values)
    n = srt.size
    idx = np.ceil(np.round(probs * n, 9)).astype(int)
    idx = np.clip(idx, 1, n)
    return np.unique(srt[idx - 1])
