"""Exchangeable-bootstrap inference for the full estimation pipeline.

Each replicate reweights every threshold likelihood with a shared random
weight vector, refits the whole model (rearrangement included), and
evaluates a user-supplied functional of the refitted joint model.  Two
weight laws are provided, both with mean and variance tending to 1:

* ``multinomial`` - counts of n draws over n equiprobable cells, i.e. the
  classic nonparametric bootstrap.  Integer weights also let the solver
  drop zero-weight rows.
* ``exponential`` - i.i.d. unit exponentials scaled by their sample mean
  (a Bayesian bootstrap; weights average exactly 1).

``ones`` is a degenerate all-weights-one scheme useful only for testing.

Randomness is drawn from the Philox counter-based generator keyed by
``(seed, replicate_index)``, so replicate r is reproducible in isolation
and the ensemble is bitwise identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from .dr import DistributionRegression
from .glm import FitStatus
from .joint import DEFAULT_OVERHEAD, JointModel

_WEIGHT_KINDS = ("multinomial", "exponential", "ones")


@dataclass(frozen=True)
class WeightScheme:
    """Weight law and base seed for the bootstrap streams."""

    kind: str = "multinomial"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise ValueError(f"kind must be one of {_WEIGHT_KINDS}")


def _replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    # Philox is counter-based: distinct (seed, index) keys give disjoint
    # deterministic streams regardless of draw order elsewhere.
    return np.random.Generator(np.random.Philox(key=[int(seed), int(replicate_index)]))


def draw_weights(scheme: WeightScheme, n: int, replicate_index: int) -> np.ndarray:
    """Weight vector for one replicate; deterministic in (seed, index)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if scheme.kind == "ones":
        return np.ones(n)
    rng = _replicate_rng(scheme.seed, replicate_index)
    if scheme.kind == "multinomial":
        return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
    w = rng.exponential(size=n)
    return w / w.mean()


@dataclass
class BootstrapResult:
    """Point estimate, replicate values, and per-replicate degeneracy flags."""

    point: np.ndarray
    replicates: np.ndarray
    flagged: np.ndarray
    scheme: WeightScheme
    functional_id: str = "functional"

    @property
    def n_replicates(self) -> int:
        return self.replicates.shape[0]

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    def ci(self, level: float = 0.95, exclude_flagged: bool = False):
        reps = self.replicates
        if exclude_flagged:
            reps = reps[~self.flagged]
        if reps.ndim == 1:
            return percentile_ci(reps, level)
        lo = np.empty(reps.shape[1])
        hi = np.empty(reps.shape[1])
        for j in range(reps.shape[1]):
            lo[j], hi[j] = percentile_ci(reps[:, j], level)
        return lo, hi

    def summary_row(self, level: float = 0.95) -> tuple:
        """(functional_id, point, lo, hi, B, flagged_count, seed) CSV row."""
        lo, hi = self.ci(level)
        return (
            self.functional_id,
            float(np.atleast_1d(self.point)[0]),
            float(np.atleast_1d(lo)[0]),
            float(np.atleast_1d(hi)[0]),
            self.n_replicates,
            self.n_flagged,
            self.scheme.seed,
        )


def percentile_ci(replicates, level: float) -> tuple:
    """Percentile interval from the replicate values.

    Uses the ceil(p*B) order-statistic convention on the empirical
    (1-level)/2 and (1+level)/2 quantiles; requires at least 20 replicates.
    """
    replicates = np.asarray(replicates, dtype=float).reshape(-1)
    b = replicates.size
    if b < 20:
        raise ValueError(f"need at least 20 replicates for a percentile interval, got {b}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    srt = np.sort(replicates)
    lo_p = (1.0 - level) / 2.0
    hi_p = (1.0 + level) / 2.0
    lo_idx = min(max(int(np.ceil(np.round(lo_p * b, 9))), 1), b)
    hi_idx = min(max(int(np.ceil(np.round(hi_p * b, 9))), 1), b)
    return float(srt[lo_idx - 1]), float(srt[hi_idx - 1])


def _worse_than_base(statuses, base_statuses) -> bool:
    return any(
        s != FitStatus.CONVERGED and b == FitStatus.CONVERGED
        for s, b in zip(statuses, base_statuses)
    )


def bootstrap_fit(
    estimator: DistributionRegression,
    X,
    y,
    z,
    functional: Callable[[JointModel], Union[float, np.ndarray]],
    *,
    scheme: WeightScheme = WeightScheme(),
    n_replicates: int = 300,
    overhead: float = DEFAULT_OVERHEAD,
    functional_id: str = "functional",
    n_jobs=None,
) -> BootstrapResult:
    """Refit the pipeline under exchangeable weights and collect a functional.

    The point estimate is the unweighted fit; every replicate reuses its
    grids and design.  Replicates where some threshold fit degenerates (or
    stops converging) while the base fit converged are flagged, not dropped;
    ``BootstrapResult.ci`` can exclude them on request.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    base = clone(estimator).fit(X, y, z)
    base_model = JointModel(base, overhead)
    point = np.asarray(functional(base_model), dtype=float)
    base_statuses = list(base.coef_path_.y_status) + list(base.coef_path_.z_status)

    # freeze the grid so replicates share the base model's thresholds
    template = clone(estimator)
    template.set_params(y_grid=base.y_grid_, y_probs=None)

    def one(replicate_index: int):
        w = draw_weights(scheme, n, replicate_index)
        rep = clone(template).fit(X, y, z, sample_weight=w)
        statuses = list(rep.coef_path_.y_status) + list(rep.coef_path_.z_status)
        value = np.asarray(functional(JointModel(rep, overhead)), dtype=float)
        return value, _worse_than_base(statuses, base_statuses)

    if n_jobs in (None, 1):
        results = [one(r) for r in range(n_replicates)]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(one)(r) for r in range(n_replicates))

    replicates = np.stack([v for v, _ in results])
    flagged = np.array([f for _, f in results], dtype=bool)
    return BootstrapResult(point, replicates, flagged, scheme, functional_id)
