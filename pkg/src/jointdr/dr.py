"""Distribution regression for a continuous and a discrete outcome.

``DistributionRegression`` fits, over a grid of cutoffs, binary regressions
of the indicators 1{y <= cutoff} (design: discrete outcome plus covariates)
and 1{z <= level} (design: covariates only), one maximum-likelihood problem
per threshold.  The two families of fitted coefficients give evaluable
conditional CDFs

    F(y | x, z) = link(z * alpha(y) + x' beta(y))
    F(z | x)    = link(x' gamma(z))

which are monotonized by rearrangement before any evaluation.  On a fixed
grid the rearrangement of a step function reduces to sorting its values, a
value-preserving operation that never increases the distance to the true
(monotone) CDF.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .data import find_intercept_column
from .glm import DEFAULT_MAX_ITER, DEFAULT_TOL, BinaryFitResult, FitStatus, fit_binary_mle
from .grids import ThresholdGrid, empirical_quantiles, quantile_probs
from .links import get_link

SERIALIZATION_VERSION = 1


class RankDeficientDesignError(ValueError):
    """Design matrix loses full column rank on the (weighted) sample."""


def rearrange(values: np.ndarray) -> np.ndarray:
    """Monotonize CDF values on a grid by sorting them ascending.

    Accepts a vector (one CDF slice) or a matrix (one slice per row, sorted
    along the last axis).  The multiset of values in each slice is preserved.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
        raise ValueError("rearrange expects probabilities in [0, 1]")
    return np.sort(values, axis=-1)


@dataclass(frozen=True)
class DesignSpec:
    """Resolved design layout: interaction pairs and discrete-outcome encoding.

    ``interactions`` holds (j, k) column index pairs, j < k, both referring to
    non-intercept columns of the raw covariate matrix; their products are
    appended as extra columns.  ``z_encoding`` is "linear" (the discrete
    outcome enters as a single scalar column) or "dummies" (one indicator per
    support level above the smallest).  ``z_interactions`` lists raw covariate
    columns whose products with the discrete outcome extend the
    continuous-outcome design (they count as regressor products there; the
    count equation never sees them).
    """

    interactions: tuple = ()
    z_encoding: str = "linear"
    z_interactions: tuple = ()

    def __post_init__(self):
        if self.z_encoding not in ("linear", "dummies"):
            raise ValueError("z_encoding must be 'linear' or 'dummies'")
        if self.z_interactions and self.z_encoding != "linear":
            raise ValueError("z_interactions require the linear z encoding")


def resolve_interactions(spec, n_cols: int, intercept_col: int) -> tuple:
    """Normalize an interactions argument into validated (j, k) pairs."""
    if spec is None:
        return ()
    if isinstance(spec, str):
        if spec != "pairwise":
            raise ValueError("interactions must be None, 'pairwise', or index pairs")
        plain = [j for j in range(n_cols) if j != intercept_col]
        return tuple((a, b) for i, a in enumerate(plain) for b in plain[i + 1 :])
    pairs = []
    for pair in spec:
        j, k = int(pair[0]), int(pair[1])
        if j == k:
            raise ValueError("interaction pair must involve two distinct columns")
        j, k = min(j, k), max(j, k)
        if intercept_col in (j, k):
            raise ValueError("interaction pairs must not reference the intercept")
        if not (0 <= j < n_cols and k < n_cols):
            raise ValueError(f"interaction pair {(j, k)} out of range")
        if (j, k) in pairs:
            raise ValueError(f"duplicate interaction pair {(j, k)}")
        pairs.append((j, k))
    return tuple(pairs)


def expand_covariates(x: np.ndarray, interactions: tuple) -> np.ndarray:
    """Append the interaction product columns to ``x``."""
    if not interactions:
        return x
    extra = np.column_stack([x[:, j] * x[:, k] for j, k in interactions])
    return np.hstack([x, extra])


def _resolve_z_interactions(spec, n_cols: int, intercept_col: int) -> tuple:
    if spec is None or spec is False:
        return ()
    if spec is True:
        return tuple(j for j in range(n_cols) if j != intercept_col)
    cols = []
    for j in spec:
        j = int(j)
        if j == intercept_col:
            raise ValueError("z_interactions must not reference the intercept")
        if not 0 <= j < n_cols:
            raise ValueError(f"z_interaction column {j} out of range")
        if j in cols:
            raise ValueError(f"duplicate z_interaction column {j}")
        cols.append(j)
    return tuple(cols)


@dataclass
class CoefficientPath:
    """Fitted coefficient arrays over both threshold grids.

    alpha has one row per y-cutoff (one column for linear z-encoding, one per
    non-reference support level for dummies); beta rows align with alpha;
    gamma has one row per z-cutoff (the support minus its maximum).  Status
    arrays record the solver outcome per threshold.
    """

    y_grid: np.ndarray
    z_grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    y_status: list
    z_status: list


def _fit_thresholds(design, label_fn, cutoffs, weights, link, tol, max_iter, n_jobs):
    def one(cutoff):
        return fit_binary_mle(
            design, label_fn(cutoff), weights,
            link=link, tol=tol, max_iter=max_iter, check_rank=False,
        )

    if n_jobs in (None, 1):
        return [one(c) for c in cutoffs]
    runs = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(one)(c) for c in cutoffs)
    return list(runs)


def _check_full_rank(design, weights, what):
    if weights is not None:
        design = design[np.asarray(weights) > 0]
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise RankDeficientDesignError(f"{what} design is rank deficient")


class DistributionRegression(BaseEstimator):
    """Joint conditional-CDF estimator via per-threshold binary regressions.

    Parameters
    ----------
    y_grid : array-like, optional
        Explicit cutoffs for the continuous outcome.  When omitted, the grid
        is built from empirical quantiles of the training outcome at
        ``y_probs``.
    y_probs : array-like, optional
        Quantile probabilities for the automatic grid (default 1%, ..., 100%).
    grid_on_positive : bool
        Build the automatic grid from strictly positive outcome values only
        (the convention for zero-inflated severity data).
    link_y, link_z : "logit" or "probit"
        Link for each outcome equation.
    interactions : None, "pairwise", or sequence of index pairs
        Pairwise covariate products appended to the design; "pairwise" uses
        all products of distinct non-intercept columns.
    z_encoding : "linear" or "dummies"
        How the discrete outcome enters the continuous-outcome design.
    z_interactions : bool or sequence of column indices
        Products of the discrete outcome with covariate columns, appended to
        the continuous-outcome design only; True uses every non-intercept
        column.  Requires the linear z encoding.
    fit_y_positive_only : bool
        Restrict the y-equation fits to rows with z > 0.
    tol, max_iter : solver controls passed to every threshold fit.
    n_jobs : parallelism over threshold fits (joblib threads).

    The covariate matrix must contain exactly one explicit constant-one
    intercept column unless ``check_intercept=False``.
    """

    def __init__(
        self,
        y_grid=None,
        y_probs=None,
        grid_on_positive: bool = False,
        link_y: str = "logit",
        link_z: str = "logit",
        interactions=None,
        z_encoding: str = "linear",
        z_interactions=False,
        fit_y_positive_only: bool = False,
        check_intercept: bool = True,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        n_jobs=None,
    ):
        self.y_grid = y_grid
        self.y_probs = y_probs
        self.grid_on_positive = grid_on_positive
        self.link_y = link_y
        self.link_z = link_z
        self.interactions = interactions
        self.z_encoding = z_encoding
        self.z_interactions = z_interactions
        self.fit_y_positive_only = fit_y_positive_only
        self.check_intercept = check_intercept
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    # ------------------------------------------------------------------ fit

    def fit(self, X, y, z, sample_weight=None):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        z = np.asarray(z)
        zf = z.astype(float)
        if np.any(zf != np.round(zf)) or np.any(zf < 0):
            raise ValueError("z must contain non-negative integers")
        z = zf.astype(np.int64)
        n = X.shape[0]
        if y.shape[0] != n or z.shape[0] != n:
            raise ValueError("X, y, z must have the same number of rows")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        if sample_weight is not None:
            sample_weight = np.asarray(sample_weight, dtype=float).reshape(n)
            if np.any(sample_weight < 0):
                raise ValueError("sample_weight must be non-negative")

        intercept_col = find_intercept_column(X) if self.check_intercept else -1
        pairs = resolve_interactions(self.interactions, X.shape[1], intercept_col)
        zint = _resolve_z_interactions(self.z_interactions, X.shape[1], intercept_col)
        spec = DesignSpec(
            interactions=pairs, z_encoding=self.z_encoding, z_interactions=zint
        )

        if self.y_grid is not None:
            grid = np.asarray(self.y_grid, dtype=float)
            y_grid = ThresholdGrid.from_points(grid).points
        else:
            probs = quantile_probs() if self.y_probs is None else np.asarray(self.y_probs, float)
            base = y[y > 0] if self.grid_on_positive else y
            if base.size == 0:
                raise ValueError("no positive outcome values to build the grid from")
            y_grid = empirical_quantiles(base, probs)

        z_support = np.unique(z)
        z_grid = z_support[:-1]

        x_expanded = expand_covariates(X, pairs)

        # z-equation: covariates only
        _check_full_rank(x_expanded, sample_weight, "z-equation")
        z_fits = _fit_thresholds(
            x_expanded, lambda c: (z <= c).astype(float), z_grid,
            sample_weight, self.link_z, self.tol, self.max_iter, self.n_jobs,
        )

        # y-equation: discrete outcome (encoded) ahead of the covariates,
        # optionally followed by count-by-covariate product columns
        z_cols = self._encode_z_training(z, z_support)
        if zint:
            z_cols = np.hstack([z_cols, z.astype(float)[:, None] * X[:, list(zint)]])
        n_alpha_total = z_cols.shape[1]

        if self.fit_y_positive_only:
            rows = z > 0
            if not np.any(rows):
                raise ValueError("fit_y_positive_only requires rows with z > 0")
        else:
            rows = np.ones(n, dtype=bool)
        # columns of the z-block that are constant on the fitted rows (a
        # single positive support level, say) are absorbed by the intercept;
        # drop them from the fit and restore zero coefficients afterwards
        keep_z = [
            j for j in range(n_alpha_total)
            if np.unique(z_cols[rows][:, j]).size > 1
        ]
        y_design_fit = np.hstack([z_cols[rows][:, keep_z], x_expanded[rows]])
        y_sub = y[rows]
        y_weights = None if sample_weight is None else sample_weight[rows]
        _check_full_rank(y_design_fit, y_weights, "y-equation")
        y_fits = _fit_thresholds(
            y_design_fit, lambda c: (y_sub <= c).astype(float), y_grid,
            y_weights, self.link_y, self.tol, self.max_iter, self.n_jobs,
        )

        n_kept = len(keep_z)
        alpha = np.zeros((len(y_grid), n_alpha_total))
        if n_kept:
            alpha[:, keep_z] = np.vstack([f.coef[:n_kept] for f in y_fits])
        self.coef_path_ = CoefficientPath(
            y_grid=y_grid,
            z_grid=z_grid,
            alpha=alpha,
            beta=np.vstack([f.coef[n_kept:] for f in y_fits]),
            gamma=(
                np.vstack([f.coef for f in z_fits])
                if len(z_fits)
                else np.zeros((0, x_expanded.shape[1]))
            ),
            y_status=[f.status for f in y_fits],
            z_status=[f.status for f in z_fits],
        )
        self.y_grid_ = y_grid
        self.z_support_ = z_support
        self.design_spec_ = spec
        self.intercept_col_ = intercept_col
        self.n_features_in_ = X.shape[1]
        return self

    def _encode_z_training(self, z, z_support):
        if self.z_encoding == "linear":
            return z.astype(float)[:, None]
        # dummies: one column per support level above the smallest
        levels = z_support[1:]
        return (z[:, None] == levels[None, :]).astype(float)

    def _encode_z_query(self, z: int) -> np.ndarray:
        if self.design_spec_.z_encoding == "linear":
            return np.array([float(z)])
        levels = self.z_support_[1:]
        return (levels == z).astype(float)

    # ----------------------------------------------------------- evaluation

    def _expand_query(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"query covariates have {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("query covariates must be finite")
        return expand_covariates(X, self.design_spec_.interactions)

    def cdf_y_curves(self, X, z: int) -> np.ndarray:
        """Rearranged F(y | x, z) over the full y-grid, one row per x row.

        When the severity equation was fitted on positive-count rows only,
        the z=0 slice is the no-claim convention (severity identically zero),
        i.e. the constant 1 over any positive grid.
        """
        check_is_fitted(self, "coef_path_")
        if int(z) not in self.z_support_:
            raise ValueError(f"z={z} outside the fitted support {self.z_support_.tolist()}")
        X2d = np.atleast_2d(np.asarray(X, dtype=float))
        if self.fit_y_positive_only and int(z) == 0:
            return np.ones((X2d.shape[0], self.y_grid_.size))
        path = self.coef_path_
        xe = self._expand_query(X2d)
        enc = self._encode_z_query(int(z))
        n_enc = enc.size
        index = xe @ path.beta.T + (enc @ path.alpha[:, :n_enc].T)[None, :]
        zint = self.design_spec_.z_interactions
        if zint:
            index = index + (float(z) * X2d[:, list(zint)]) @ path.alpha[:, n_enc:].T
        vals = get_link(self.link_y).cdf(index)
        for j, status in enumerate(path.y_status):
            if status == FitStatus.DEGENERATE_ALL_ZERO:
                vals[:, j] = 0.0
            elif status == FitStatus.DEGENERATE_ALL_ONE:
                vals[:, j] = 1.0
        return np.sort(vals, axis=1)

    def cdf_z_curves(self, X, rearranged: bool = True) -> np.ndarray:
        """F(z | x) over the support, one row per x row.

        The column for the largest support level is pinned to 1, so each row
        is a proper CDF over the finite support.  ``rearranged=False`` skips
        the monotonization and returns the raw per-threshold values; for a
        logit fit with an intercept their sample average reproduces the
        empirical CDF exactly (the score identity), which is what the
        goodness-of-fit frequency table relies on.
        """
        check_is_fitted(self, "coef_path_")
        path = self.coef_path_
        xe = self._expand_query(X)
        if len(path.z_grid):
            vals = get_link(self.link_z).cdf(xe @ path.gamma.T)
            for j, status in enumerate(path.z_status):
                if status == FitStatus.DEGENERATE_ALL_ZERO:
                    vals[:, j] = 0.0
                elif status == FitStatus.DEGENERATE_ALL_ONE:
                    vals[:, j] = 1.0
        else:
            vals = np.zeros((xe.shape[0], 0))
        curves = np.hstack([vals, np.ones((xe.shape[0], 1))])
        if rearranged:
            return np.sort(curves, axis=1)
        return curves

    def pmf_z(self, X, rearranged: bool = True) -> np.ndarray:
        """Point masses over the support, one row per x row."""
        curves = self.cdf_z_curves(X, rearranged=rearranged)
        return np.diff(curves, axis=1, prepend=0.0)

    def cdf_y(self, x, z: int, y) -> Union[float, np.ndarray]:
        """Monotonized F(y | x, z) for a single covariate row.

        Right-continuous step interpolation on the grid: 0 below the first
        cutoff, the top value at or above the last one.
        """
        curve = self.cdf_y_curves(np.atleast_2d(x), z)[0]
        return _step_cdf(self.y_grid_, curve, y)

    def cdf_z(self, x, z: int) -> float:
        """Monotonized F(z | x); 0 below the support, 1 above it."""
        support = self.z_support_
        if z < support[0]:
            return 0.0
        if z >= support[-1]:
            return 1.0
        curve = self.cdf_z_curves(np.atleast_2d(x))[0]
        return float(curve[np.searchsorted(support, z, side="right") - 1])

    def quantile_y(self, x, z: int, tau: float) -> float:
        """Smallest grid point whose monotonized CDF reaches ``tau``."""
        if not 0.0 < tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        curve = self.cdf_y_curves(np.atleast_2d(x), z)[0]
        idx = int(np.searchsorted(curve, tau, side="left"))
        if idx >= curve.size:
            warnings.warn(
                f"quantile level {tau} above the top of the fitted CDF; returning the grid maximum",
                RuntimeWarning,
                stacklevel=2,
            )
            return float(self.y_grid_[-1])
        return float(self.y_grid_[idx])

    # -------------------------------------------------------- serialization

    def to_json(self) -> str:
        check_is_fitted(self, "coef_path_")
        path = self.coef_path_
        doc = {
            "version": SERIALIZATION_VERSION,
            "kind": "distribution_regression",
            "params": {
                "link_y": self.link_y,
                "link_z": self.link_z,
                "z_encoding": self.design_spec_.z_encoding,
                "interactions": [list(p) for p in self.design_spec_.interactions],
                "z_interactions": list(self.design_spec_.z_interactions),
                "fit_y_positive_only": self.fit_y_positive_only,
                "tol": self.tol,
                "max_iter": self.max_iter,
            },
            "fitted": {
                "y_grid": path.y_grid.tolist(),
                "z_grid": path.z_grid.tolist(),
                "z_support": self.z_support_.tolist(),
                "alpha": path.alpha.tolist(),
                "beta": path.beta.tolist(),
                "gamma": path.gamma.tolist(),
                "y_status": [s.value for s in path.y_status],
                "z_status": [s.value for s in path.z_status],
                "intercept_col": self.intercept_col_,
                "n_features_in": self.n_features_in_,
            },
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, document: str) -> "DistributionRegression":
        doc = json.loads(document)
        if doc.get("kind") != "distribution_regression":
            raise ValueError(f"not a distribution regression document: {doc.get('kind')!r}")
        if doc.get("version") != SERIALIZATION_VERSION:
            raise ValueError(f"unsupported serialization version {doc.get('version')!r}")
        params = doc["params"]
        fitted = doc["fitted"]
        est = cls(
            y_grid=np.asarray(fitted["y_grid"], dtype=float),
            link_y=params["link_y"],
            link_z=params["link_z"],
            interactions=[tuple(p) for p in params["interactions"]] or None,
            z_encoding=params["z_encoding"],
            z_interactions=tuple(params.get("z_interactions", ())) or False,
            fit_y_positive_only=params["fit_y_positive_only"],
            tol=params["tol"],
            max_iter=params["max_iter"],
        )
        n_y = len(fitted["y_grid"])
        p_x = len(fitted["beta"][0]) if n_y else 0
        est.coef_path_ = CoefficientPath(
            y_grid=np.asarray(fitted["y_grid"], dtype=float),
            z_grid=np.asarray(fitted["z_grid"], dtype=np.int64),
            alpha=np.asarray(fitted["alpha"], dtype=float).reshape(n_y, -1),
            beta=np.asarray(fitted["beta"], dtype=float).reshape(n_y, p_x),
            gamma=np.asarray(fitted["gamma"], dtype=float).reshape(len(fitted["z_grid"]), p_x),
            y_status=[FitStatus(s) for s in fitted["y_status"]],
            z_status=[FitStatus(s) for s in fitted["z_status"]],
        )
        est.y_grid_ = est.coef_path_.y_grid
        est.z_support_ = np.asarray(fitted["z_support"], dtype=np.int64)
        est.design_spec_ = DesignSpec(
            interactions=tuple(tuple(p) for p in params["interactions"]),
            z_encoding=params["z_encoding"],
            z_interactions=tuple(params.get("z_interactions", ())),
        )
        est.intercept_col_ = fitted["intercept_col"]
        est.n_features_in_ = fitted["n_features_in"]
        return est


def _step_cdf(grid: np.ndarray, curve: np.ndarray, at) -> Union[float, np.ndarray]:
    """Right-continuous step evaluation of a CDF given on a grid."""
    at_arr = np.asarray(at, dtype=float)
    idx = np.searchsorted(grid, at_arr, side="right") - 1
    idx_clipped = np.clip(idx, 0, curve.size - 1)
    out = np.where(idx < 0, 0.0, curve[idx_clipped])
    if at_arr.ndim == 0:
        return float(out)
    return out
