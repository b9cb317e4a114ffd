"""Joint law of the outcome pair and the derived cost distributions.

A fitted ``DistributionRegression`` gives the two conditional CDFs; this
module composes them.  With point masses p(z|x) on the finite support and
severity CDFs F(y|x,z), the joint CDF is the mixture

    F(y, z | x) = sum_{z' <= z} F(y | x, z') * p(z' | x),

and the per-policy aggregate claim S = Y*Z and total cost C = Y*Z + k*Z
(k a fixed handling cost per claim) have the mixed distributions

    F_S(s|x) = p(0|x)                                     if s = 0
             = p(0|x) + sum_{z>=1} F(s/z | x, z) p(z|x)   if s > 0
    F_C(c|x) = p(0|x) + sum_{z>=1} F(c/z - k | x, z) p(z|x).

All integrals over the discrete outcome are finite sums.  The fitted cost
CDF is a step function whose only jump locations are {z*(g + k)} for grid
points g, so value-at-risk is inverted exactly by breakpoint enumeration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .dr import DistributionRegression

DEFAULT_OVERHEAD = 200.0


def _as_rows(x) -> tuple:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError("covariates must be a row vector or a matrix of rows")


def _maybe_squeeze(values: np.ndarray, single_row: bool, scalar_arg: bool):
    if single_row:
        values = values[0]
        if scalar_arg:
            return float(values if np.ndim(values) == 0 else values[0])
        return values
    if scalar_arg:
        return values[:, 0]
    return values


@dataclass
class JointModel:
    """Joint conditional distribution plus the cost overhead per claim."""

    dr: DistributionRegression
    overhead: float = DEFAULT_OVERHEAD

    def __post_init__(self):
        if self.overhead < 0:
            raise ValueError("overhead must be non-negative")

    @property
    def z_support(self) -> np.ndarray:
        return self.dr.z_support_

    @property
    def y_grid(self) -> np.ndarray:
        return self.dr.y_grid_

    # ------------------------------------------------------------ joint CDF

    def joint_cdf(self, x, y, z: int):
        """F(y, z | x): per row of ``x``, for scalar or vector ``y``."""
        X, single_row = _as_rows(x)
        if int(z) not in self.z_support:
            raise ValueError(f"z={z} outside support {self.z_support.tolist()}")
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        pmf = self.dr.pmf_z(X)
        grid = self.y_grid
        idx = np.searchsorted(grid, y_arr, side="right") - 1
        inside = idx >= 0
        out = np.zeros((X.shape[0], y_arr.size))
        for j, level in enumerate(self.z_support):
            if level > z:
                break
            curves = self.dr.cdf_y_curves(X, int(level))
            vals = np.zeros((X.shape[0], y_arr.size))
            if np.any(inside):
                vals[:, inside] = curves[:, np.clip(idx[inside], 0, grid.size - 1)]
            out += pmf[:, j][:, None] * vals
        return _maybe_squeeze(out, single_row, np.ndim(y) == 0)

    # ------------------------------------------------------ cost mixtures

    def _positive_mixture(self, X, args_by_z: Callable[[int], np.ndarray], n_args: int):
        """sum_{z>=1} F(arg(z) | x, z) * p(z|x), evaluated per row of X."""
        pmf = self.dr.pmf_z(X)
        out = np.zeros((X.shape[0], n_args))
        grid = self.y_grid
        for j, level in enumerate(self.z_support):
            if level < 1:
                continue
            curves = self.dr.cdf_y_curves(X, int(level))
            args = args_by_z(int(level))
            # the grid is shared by every row, so each argument maps to one
            # column index of the rearranged curve matrix
            idx = np.searchsorted(grid, args, side="right") - 1
            inside = idx >= 0
            vals = np.zeros((X.shape[0], n_args))
            if np.any(inside):
                vals[:, inside] = curves[:, np.clip(idx[inside], 0, grid.size - 1)]
            out += pmf[:, j][:, None] * vals
        return out

    def _atom_at_zero(self, X) -> np.ndarray:
        pmf = self.dr.pmf_z(X)
        if self.z_support[0] == 0:
            return pmf[:, 0]
        return np.zeros(X.shape[0])

    def aggregate_claim_cdf(self, x, s):
        """F_S(s | x) for the aggregate claim S = Y*Z; s must be >= 0."""
        X, single_row = _as_rows(x)
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < 0):
            raise ValueError("aggregate claim argument must be non-negative")
        atom = self._atom_at_zero(X)
        out = self._positive_mixture(X, lambda z: s_arr / z, s_arr.size)
        out += atom[:, None]
        out[:, s_arr == 0.0] = atom[:, None]
        return _maybe_squeeze(out, single_row, np.ndim(s) == 0)

    def total_cost_cdf(self, x, c):
        """F_C(c | x) for the total cost C = Y*Z + overhead*Z."""
        X, single_row = _as_rows(x)
        c_arr = np.atleast_1d(np.asarray(c, dtype=float))
        k = self.overhead
        out = self._positive_mixture(X, lambda z: c_arr / z - k, c_arr.size)
        out += self._atom_at_zero(X)[:, None]
        return _maybe_squeeze(out, single_row, np.ndim(c) == 0)

    def positive_severity_cdf(self, x, y):
        """F(y | x, Z > 0): the severity mixture over z >= 1, renormalized."""
        X, single_row = _as_rows(x)
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        num = self._positive_mixture(X, lambda z: y_arr, y_arr.size)
        denom = 1.0 - self._atom_at_zero(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(denom[:, None] > 0, num / denom[:, None], np.nan)
        return _maybe_squeeze(out, single_row, np.ndim(y) == 0)

    def severity_mixture_curve(self, x) -> np.ndarray:
        """Marginal severity CDF over the grid: the z-mixture, row-averaged."""
        X, _ = _as_rows(x)
        pmf = self.dr.pmf_z(X)
        mixture = np.zeros((X.shape[0], self.y_grid.size))
        for j, level in enumerate(self.z_support):
            mixture += pmf[:, j][:, None] * self.dr.cdf_y_curves(X, int(level))
        return mixture.mean(axis=0)

    def quantile_y(self, x, tau: float, interpolate: bool = True) -> float:
        """Marginal severity quantile: inverts the z-mixture of severity CDFs.

        For a matrix ``x`` the mixture CDF is averaged over its rows first.
        By default the crossing is located by linear interpolation between
        the bracketing grid points, which removes the half-step rounding of
        a raw grid search; ``interpolate=False`` returns the smallest grid
        point whose mixed CDF reaches ``tau``.
        """
        if not 0.0 < tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        curve = self.severity_mixture_curve(x)
        grid = self.y_grid
        idx = int(np.searchsorted(curve, tau, side="left"))
        if idx >= curve.size:
            warnings.warn(
                f"severity CDF saturates below tau={tau}; returning the grid maximum",
                RuntimeWarning,
                stacklevel=2,
            )
            return float(grid[-1])
        if not interpolate or idx == 0 or curve[idx] <= curve[idx - 1]:
            return float(grid[idx])
        f_lo, f_hi = curve[idx - 1], curve[idx]
        frac = (tau - f_lo) / (f_hi - f_lo)
        return float(grid[idx - 1] + frac * (grid[idx] - grid[idx - 1]))

    # ----------------------------------------------------------------- VaR

    def cost_breakpoints(self) -> np.ndarray:
        """Sorted jump locations of the fitted total-cost step CDF."""
        positive = self.z_support[self.z_support >= 1]
        pts = [np.zeros(1)]
        for z in positive:
            pts.append(z * (self.y_grid + self.overhead))
        return np.unique(np.concatenate(pts))

    def var(self, x, tau: float) -> float:
        """Value-at-risk of the total cost: inf{c : F_C(c|x) >= tau}.

        For a matrix ``x`` the CDF is averaged over its rows first (cohort
        VaR).  The inversion scans the exact breakpoints of the step CDF.
        """
        if not 0.0 < tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        X, _ = _as_rows(x)
        bps = self.cost_breakpoints()
        cdf = np.mean(np.atleast_2d(self.total_cost_cdf(X, bps)), axis=0)
        idx = int(np.searchsorted(cdf, tau, side="left"))
        if idx >= bps.size:
            warnings.warn(
                f"cost CDF saturates below tau={tau}; returning the largest breakpoint",
                RuntimeWarning,
                stacklevel=2,
            )
            return float(bps[-1])
        return float(bps[idx])

    # ------------------------------------------------------------ sampling

    def sample(self, x, n_draws: int, rng: np.random.Generator):
        """Draw (y, z) pairs from the fitted law at a single covariate row.

        z comes from the rearranged point masses, y from inverse transform on
        the monotonized severity slice (values land on grid points).
        """
        X, _ = _as_rows(x)
        if X.shape[0] != 1:
            raise ValueError("sample draws at a single covariate row")
        pmf = self.dr.pmf_z(X)[0]
        z_idx = rng.choice(self.z_support.size, size=n_draws, p=pmf / pmf.sum())
        z_draws = self.z_support[z_idx]
        y_draws = np.zeros(n_draws)
        grid = self.y_grid
        for level in np.unique(z_draws):
            sel = z_draws == level
            curve = self.dr.cdf_y_curves(X, int(level))[0]
            u = rng.uniform(size=int(sel.sum()))
            pos = np.searchsorted(curve, u, side="left")
            y_draws[sel] = grid[np.clip(pos, 0, grid.size - 1)]
        return y_draws, z_draws


def population_average(xs, evaluator: Callable, *args, chunk_size: int = 4096):
    """Arithmetic mean of a per-row evaluator over covariate rows.

    ``evaluator`` is one of the JointModel CDF methods (or any callable with
    the same row contract); averaging is chunked so large cohorts never
    materialize a full row-by-argument matrix.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 0:
        raise ValueError("population average over an empty cohort")
    total = None
    for start in range(0, xs.shape[0], chunk_size):
        block = xs[start : start + chunk_size]
        vals = np.asarray(evaluator(block, *args), dtype=float)
        if vals.ndim == 1:  # scalar argument: one value per row
            vals = vals[:, None]
        block_sum = vals.sum(axis=0)
        total = block_sum if total is None else total + block_sum
    result = total / xs.shape[0]
    return result if result.size > 1 else float(result[0])


def query_rows(query_type: str, ident: str, arguments, values) -> list:
    """Flatten one query result into (query_type, id, argument, value) rows."""
    arguments = np.atleast_1d(arguments)
    values = np.atleast_1d(values)
    return [
        (query_type, ident, float(a), float(v)) for a, v in zip(arguments, values)
    ]
