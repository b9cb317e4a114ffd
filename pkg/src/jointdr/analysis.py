"""Model-comparison analyses: goodness of fit, CDF tables, VaR tables, and
the Monte Carlo bias/MSE harness.

These functions produce plain DataFrames; the command-line layer only adds
argument parsing and file output around them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.stats
from joblib import Parallel, delayed

from .baselines import GaussianCopulaRegression, PoissonGammaRegression, parametric_quantiles
from .bootstrap import WeightScheme, draw_weights, percentile_ci
from .dgp import DgpSpec, dgp_preset, generate, truth_quantiles
from .dr import DistributionRegression
from .glm import FitStatus
from .joint import JointModel, population_average


# --------------------------------------------------------------- fit report


def fit_report(model: DistributionRegression) -> pd.DataFrame:
    """Per-equation solver status counts for a fitted model."""
    rows = []
    for equation, statuses in (
        ("y", model.coef_path_.y_status),
        ("z", model.coef_path_.z_status),
    ):
        for status in FitStatus:
            count = sum(1 for s in statuses if s == status)
            if count:
                rows.append({"equation": equation, "status": status.value, "count": count})
    return pd.DataFrame(rows, columns=["equation", "status", "count"])


# ------------------------------------------------------------- goodness of fit


def _poisson_fitted_counts(frequency_coefs, X, support) -> np.ndarray:
    lam = np.exp(X @ frequency_coefs)
    return np.array([scipy.stats.poisson.pmf(v, lam).sum() for v in support])


def chi_square(observed: np.ndarray, fitted: np.ndarray) -> float:
    """Sum of (obs - fit)^2 / fit over cells with positive fitted count."""
    observed = np.asarray(observed, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    keep = fitted > 0
    return float(np.sum((observed[keep] - fitted[keep]) ** 2 / fitted[keep]))


def gof_table(
    model: DistributionRegression,
    X: np.ndarray,
    z: np.ndarray,
    pg_model: Optional[PoissonGammaRegression] = None,
    copula_model: Optional[GaussianCopulaRegression] = None,
) -> pd.DataFrame:
    """Observed vs fitted frequency counts per support level, plus chi-squares.

    The DR column averages the raw (pre-rearrangement) point masses: with a
    logit link and an intercept the per-threshold score identities make the
    averaged raw CDF equal the empirical CDF exactly, which is why the DR
    chi-square is zero up to solver tolerance.  Baseline columns use the
    fitted Poisson frequency margin.
    """
    support = model.z_support_
    n = X.shape[0]
    observed = np.array([(z == v).sum() for v in support], dtype=float)
    fitted_dr = n * population_average(X, lambda block: model.pmf_z(block, rearranged=False))

    data = {"z": support, "observed": observed, "dr": fitted_dr}
    chis = {"dr": chi_square(observed, fitted_dr)}
    for label, baseline in (("poisson_gamma", pg_model), ("copula", copula_model)):
        if baseline is not None:
            fitted = _poisson_fitted_counts(baseline.frequency_coefs_, X, support)
            data[label] = fitted
            chis[label] = chi_square(observed, fitted)

    table = pd.DataFrame(data)
    chi_row = {"z": "chi_square", "observed": np.nan, **chis}
    return pd.concat([table, pd.DataFrame([chi_row])], ignore_index=True)


# ------------------------------------------------------------------ CDF table


def ecdf_at(sample: np.ndarray, args: np.ndarray) -> np.ndarray:
    sample = np.sort(np.asarray(sample, dtype=float))
    if sample.size == 0:
        return np.full(np.asarray(args).shape, np.nan)
    return np.searchsorted(sample, args, side="right") / sample.size


_CDF_TARGETS = ("y_positive", "s_positive", "c")


def _simulate_population(baseline, X, sim_per_row: int, seed: int):
    """One batch of (y, z) draws per covariate row from a fitted baseline."""
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 0xBA5E]))
    ys = np.empty((X.shape[0], sim_per_row))
    zs = np.empty((X.shape[0], sim_per_row))
    for i in range(X.shape[0]):
        ys[i], zs[i] = baseline.simulate(X[i], sim_per_row, rng)
    return ys.ravel(), zs.ravel()


def cdf_table(
    joint: JointModel,
    X: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    target: str,
    args: Optional[np.ndarray] = None,
    pg_model: Optional[PoissonGammaRegression] = None,
    copula_model: Optional[GaussianCopulaRegression] = None,
    sim_per_row: int = 5,
    seed: int = 0,
) -> pd.DataFrame:
    """(argument, model_cdf, empirical_cdf) rows for one distribution target.

    Targets: ``y_positive`` (severity given a claim, the renormalized mixture
    over positive counts), ``s_positive`` (aggregate claim given S > 0), and
    ``c`` (total cost).  The empirical column is the split's empirical CDF;
    baseline columns, when their models are supplied, are empirical CDFs of
    per-row simulated samples (the baselines' mixed laws have no cheap closed
    form, and the simulated population mirrors how they are used downstream).
    """
    if target not in _CDF_TARGETS:
        raise ValueError(f"target must be one of {_CDF_TARGETS}")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z)

    if target == "y_positive":
        observed = y[z > 0]
        model_fn = lambda block, a: joint.positive_severity_cdf(block, a)
    elif target == "s_positive":
        s = y * z
        observed = s[s > 0]
        model_fn = None
    else:
        observed = y * z + joint.overhead * z
        model_fn = lambda block, a: joint.total_cost_cdf(block, a)

    if args is None:
        base = observed[np.isfinite(observed)]
        if base.size == 0:
            raise ValueError(f"no observations for target {target!r}")
        args = np.unique(np.quantile(base, np.linspace(0.005, 1.0, 200), method="inverted_cdf"))
    args = np.asarray(args, dtype=float)

    if target == "s_positive":
        avg_all = population_average(X, joint.aggregate_claim_cdf, args)
        atom = float(population_average(X, joint.aggregate_claim_cdf, 0.0))
        model_vals = (avg_all - atom) / (1.0 - atom)
    else:
        model_vals = population_average(X, model_fn, args)

    table = pd.DataFrame(
        {"argument": args, "model_cdf": model_vals, "empirical_cdf": ecdf_at(observed, args)}
    )

    for label, baseline in (("poisson_gamma", pg_model), ("copula", copula_model)):
        if baseline is None:
            continue
        sim_y, sim_z = _simulate_population(baseline, X, sim_per_row, seed)
        if target == "y_positive":
            sim_obs = sim_y[sim_z > 0]
        elif target == "s_positive":
            sim_s = sim_y * sim_z
            sim_obs = sim_s[sim_s > 0]
        else:
            sim_obs = sim_y * sim_z + joint.overhead * sim_z
        table[f"{label}_cdf"] = ecdf_at(sim_obs, args)
    return table


# ------------------------------------------------------------------ VaR table


def _resampled_step_quantiles(
    values_fn: Callable[[np.ndarray], np.ndarray],
    breakpoints: np.ndarray,
    n_rows: int,
    taus: Sequence[float],
    scheme: WeightScheme,
    n_replicates: int,
    chunk_size: int = 4096,
):
    """Point estimates and row-resampled replicates of step-CDF quantiles.

    ``values_fn(row_indices)`` returns the per-row CDF values at the common
    breakpoints; replicate b reweights rows by multinomial counts drawn from
    the scheme's stream, so the whole computation reduces to one weighted
    average per replicate.
    """
    weights = np.empty((n_replicates, n_rows))
    for b in range(n_replicates):
        weights[b] = draw_weights(scheme, n_rows, b)

    point_sum = np.zeros(breakpoints.size)
    rep_sums = np.zeros((n_replicates, breakpoints.size))
    for start in range(0, n_rows, chunk_size):
        idx = np.arange(start, min(start + chunk_size, n_rows))
        vals = values_fn(idx)
        point_sum += vals.sum(axis=0)
        rep_sums += weights[:, idx] @ vals

    def invert(cdf_row):
        out = np.empty(len(taus))
        for j, tau in enumerate(taus):
            pos = int(np.searchsorted(cdf_row, tau, side="left"))
            out[j] = breakpoints[min(pos, breakpoints.size - 1)]
        return out

    point = invert(point_sum / n_rows)
    reps = np.vstack([invert(rep_sums[b] / weights[b].sum()) for b in range(n_replicates)])
    return point, reps


def _weighted_quantiles(sorted_values, sorted_row_ids, row_weights, taus):
    w = row_weights[sorted_row_ids]
    cw = np.cumsum(w)
    total = cw[-1]
    out = np.empty(len(taus))
    for j, tau in enumerate(taus):
        pos = int(np.searchsorted(cw, tau * total, side="left"))
        out[j] = sorted_values[min(pos, sorted_values.size - 1)]
    return out


def var_table(
    joint: JointModel,
    X: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    frame: pd.DataFrame,
    cohorts: Dict[str, str],
    taus: Sequence[float],
    level: float = 0.95,
    scheme: WeightScheme = WeightScheme(),
    n_replicates: int = 300,
    pg_model: Optional[PoissonGammaRegression] = None,
    copula_model: Optional[GaussianCopulaRegression] = None,
    sim_per_row: int = 10,
    seed: int = 0,
) -> pd.DataFrame:
    """Cohort VaR table with percentile intervals from row resampling.

    The point estimate inverts the cohort-averaged total-cost CDF; intervals
    come from resampling the cohort's covariate rows with replacement
    (out-of-sample uncertainty over the policyholder mix).  Baseline VaRs use
    per-row simulated cost draws, resampled with the same row weights.
    """
    from .ingest import cohort_mask

    y = np.asarray(y, dtype=float)
    z = np.asarray(z)
    cost_observed = y * z + joint.overhead * z
    taus = list(taus)

    rows = []
    for label, query in cohorts.items():
        mask = cohort_mask(frame, query)
        if not mask.any():
            raise ValueError(f"cohort {label!r} selects no rows")
        Xc = X[mask]
        n_c = Xc.shape[0]
        bps = joint.cost_breakpoints()

        point, reps = _resampled_step_quantiles(
            lambda idx: np.atleast_2d(joint.total_cost_cdf(Xc[idx], bps)),
            bps,
            n_c,
            taus,
            scheme,
            n_replicates,
        )

        baseline_cols = {}
        for blabel, baseline in (("poisson_gamma", pg_model), ("copula", copula_model)):
            if baseline is None:
                continue
            sim_y, sim_z = _simulate_population(baseline, Xc, sim_per_row, seed)
            sim_cost = sim_y * sim_z + joint.overhead * sim_z
            row_ids = np.repeat(np.arange(n_c), sim_per_row)
            order = np.argsort(sim_cost, kind="stable")
            sv, sr = sim_cost[order], row_ids[order]
            b_point = _weighted_quantiles(sv, sr, np.ones(n_c), taus)
            b_reps = np.vstack(
                [
                    _weighted_quantiles(sv, sr, draw_weights(scheme, n_c, b), taus)
                    for b in range(n_replicates)
                ]
            )
            baseline_cols[blabel] = (b_point, b_reps)

        for j, tau in enumerate(taus):
            lo, hi = percentile_ci(reps[:, j], level)
            row = {
                "cohort": label,
                "tau": tau,
                "n_rows": n_c,
                "empirical": float(
                    np.quantile(cost_observed[mask], tau, method="inverted_cdf")
                ),
                "dr": point[j],
                "dr_lo": lo,
                "dr_hi": hi,
            }
            for blabel, (b_point, b_reps) in baseline_cols.items():
                b_lo, b_hi = percentile_ci(b_reps[:, j], level)
                row[blabel] = b_point[j]
                row[f"{blabel}_lo"] = b_lo
                row[f"{blabel}_hi"] = b_hi
            rows.append(row)
    return pd.DataFrame(rows)


# ------------------------------------------------------- Monte Carlo harness

_ESTIMATORS = ("dr", "poisson_gamma", "copula", "truth")


@dataclass(frozen=True)
class CompareConfig:
    """One Monte Carlo comparison run (one design, both quantities)."""

    kind: str
    case: int
    n: int = 2000
    n_reps: int = 100
    taus: tuple = (0.95,)
    x1_values: tuple = (0.25, 0.5, 0.75)
    estimators: tuple = ("dr", "poisson_gamma", "copula")
    overhead: float = 1.0
    seed: int = 0
    truth_sims: int = 1_000_000
    estimator_sims: int = 200_000
    z_from_floor: bool = True
    dr_params: dict = None

    def query_points(self):
        return [np.array([1.0, x1, 0.5, 0.5]) for x1 in self.x1_values]


def _rep_seed(base: int, rep: int) -> int:
    return int(base) * 1_000_003 + rep + 1


def _one_rep(config: CompareConfig, rep: int) -> dict:
    spec = dgp_preset(
        config.kind,
        config.case,
        n=config.n,
        seed=_rep_seed(config.seed, rep),
        z_from_floor=config.z_from_floor,
    )
    ds = generate(spec)
    out = {}
    points = config.query_points()

    if "dr" in config.estimators:
        # benchmark conventions: threshold grid at whole-sample outcome
        # quantiles 1%, ..., 100%; main-effects design (covariate products
        # are available through dr_params but inflate the tail variance of
        # the quantile estimates at this sample size)
        params = {"interactions": None, "grid_on_positive": False}
        params.update(config.dr_params or {})
        model = DistributionRegression(**params).fit(ds.x, ds.y, ds.z)
        joint = JointModel(model, config.overhead)
        for tau in config.taus:
            for x1, x in zip(config.x1_values, points):
                out[("dr", tau, x1, "q_y")] = joint.quantile_y(x, tau)
                out[("dr", tau, x1, "q_c")] = joint.var(x, tau)

    for name, cls in (("poisson_gamma", PoissonGammaRegression), ("copula", GaussianCopulaRegression)):
        if name not in config.estimators:
            continue
        model = cls().fit(ds.x, ds.y, ds.z)
        for tau in config.taus:
            for x1, x in zip(config.x1_values, points):
                q_y, q_c = parametric_quantiles(
                    model, x, tau, config.overhead,
                    n_sim=config.estimator_sims, seed=_rep_seed(config.seed, rep),
                )
                out[(name, tau, x1, "q_y")] = q_y
                out[(name, tau, x1, "q_c")] = q_c

    if "truth" in config.estimators:
        # self-scoring oracle: an independent simulation from the true design
        for tau in config.taus:
            for x1, x in zip(config.x1_values, points):
                tq = truth_quantiles(
                    spec, x, tau, config.overhead,
                    n_sim=config.estimator_sims, seed=_rep_seed(config.seed, rep) + 1,
                )
                out[("truth", tau, x1, "q_y")] = tq.q_y
                out[("truth", tau, x1, "q_c")] = tq.q_c
    return out


def compare_table(config: CompareConfig, n_jobs=None) -> pd.DataFrame:
    """Bias / MSE of the conditional quantile estimators against the truth."""
    unknown = set(config.estimators) - set(_ESTIMATORS)
    if unknown:
        raise ValueError(f"unknown estimators {sorted(unknown)}")

    truth_spec = dgp_preset(
        config.kind, config.case, n=1, seed=config.seed, z_from_floor=config.z_from_floor
    )
    truths = {}
    for tau in config.taus:
        for x1, x in zip(config.x1_values, config.query_points()):
            tq = truth_quantiles(truth_spec, x, tau, config.overhead, n_sim=config.truth_sims)
            truths[(tau, x1, "q_y")] = tq.q_y
            truths[(tau, x1, "q_c")] = tq.q_c

    if n_jobs in (None, 1):
        results = [_one_rep(config, r) for r in range(config.n_reps)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_one_rep)(config, r) for r in range(config.n_reps)
        )

    rows = []
    for estimator in config.estimators:
        for tau in config.taus:
            for x1 in config.x1_values:
                for quantity in ("q_y", "q_c"):
                    truth = truths[(tau, x1, quantity)]
                    values = np.array([res[(estimator, tau, x1, quantity)] for res in results])
                    rows.append(
                        {
                            "dgp": config.kind,
                            "case": config.case,
                            "quantity": quantity,
                            "tau": tau,
                            "x1": x1,
                            "estimator": estimator,
                            "truth": truth,
                            "bias": float(np.mean(values) - truth),
                            "mse": float(np.mean((values - truth) ** 2)),
                            "n_reps": config.n_reps,
                        }
                    )
    return pd.DataFrame(rows)
