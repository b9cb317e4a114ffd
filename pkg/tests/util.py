"""Shared builders for hand-specified models used across test modules."""

import numpy as np
from scipy.special import logit

from jointdr import DistributionRegression, FitStatus, JointModel
from jointdr.dr import CoefficientPath, DesignSpec


def make_intercept_model(y_grid, z_support, y_slices, z_cdf_values):
    """Intercept-only model with exact hand-set CDF slice values.

    ``y_slices`` maps each support level to its raw severity CDF values over
    ``y_grid``; ``z_cdf_values`` are the raw count-CDF values for all support
    levels except the largest.  The dummy z-encoding gives every level its
    own coefficient, so arbitrary per-level targets are representable.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    z_support = np.asarray(z_support, dtype=np.int64)
    n_grid = y_grid.size
    levels = z_support[1:]
    reference = int(z_support[0])

    beta = logit(np.asarray(y_slices[reference], dtype=float))[:, None]
    alpha = np.empty((n_grid, levels.size))
    for j, level in enumerate(levels):
        alpha[:, j] = logit(np.asarray(y_slices[int(level)], dtype=float)) - beta[:, 0]
    gamma = logit(np.asarray(z_cdf_values, dtype=float))[:, None]

    est = DistributionRegression(y_grid=y_grid, z_encoding="dummies")
    est.coef_path_ = CoefficientPath(
        y_grid=y_grid,
        z_grid=z_support[:-1],
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        y_status=[FitStatus.CONVERGED] * n_grid,
        z_status=[FitStatus.CONVERGED] * (z_support.size - 1),
    )
    est.y_grid_ = y_grid
    est.z_support_ = z_support
    est.design_spec_ = DesignSpec(interactions=(), z_encoding="dummies")
    est.intercept_col_ = 0
    est.n_features_in_ = 1
    return est


def random_toy_joint(rng, overhead=None):
    """Random small joint model with exactly representable slice values."""
    n_grid = rng.integers(3, 8)
    y_grid = np.sort(rng.uniform(0.5, 30.0, size=n_grid))
    n_levels = rng.integers(2, 5)
    z_support = np.arange(n_levels)
    y_slices = {}
    for level in z_support:
        raw = np.sort(rng.uniform(0.02, 0.98, size=n_grid))
        if rng.uniform() < 0.5:
            raw[-1] = 1.0 - 1e-9  # near-saturated top slice
        y_slices[int(level)] = raw
    z_vals = np.sort(rng.uniform(0.05, 0.95, size=n_levels - 1))
    model = make_intercept_model(y_grid, z_support, y_slices, z_vals)
    k = float(rng.uniform(0.0, 5.0)) if overhead is None else overhead
    return JointModel(model, k)


X1 = np.array([1.0])
