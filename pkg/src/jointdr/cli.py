"""Command-line entry point.

Subcommands cover the full workflow: ``simulate`` writes synthetic datasets,
``fit`` estimates and serializes the distribution-regression model, ``gof``
tabulates observed vs fitted claim frequencies, ``cdf`` emits distribution
tables for plotting, ``var`` produces cohort value-at-risk tables with
bootstrap intervals, and ``compare`` runs the Monte Carlo bias/MSE harness
against the parametric baselines.

Configuration comes from an optional JSON file mirrored by command-line
flags (flags win).  Every command writes its tables as CSV plus a
``manifest.json`` recording the resolved configuration, its hash, seeds, and
library versions, so outputs are reproducible byte for byte.  Failures exit
nonzero with a one-line JSON error on stderr.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd
import scipy

from . import __version__
from .analysis import CompareConfig, cdf_table, compare_table, fit_report, gof_table, var_table
from .baselines import GaussianCopulaRegression, PoissonGammaRegression
from .bootstrap import WeightScheme
from .dgp import dgp_preset, generate
from .dr import DistributionRegression
from .grids import quantile_probs
from .ingest import ColumnMapping, IngestError, export_csv, ingest, split_indices
from .joint import JointModel

WORKERS_ENV = "JOINTDR_WORKERS"

DEFAULT_CONFIG = {
    "input": None,
    "columns": {"y": "y", "z": "z", "covariates": [], "categorical": []},
    "links": {"y": "logit", "z": "logit"},
    "grid": {"step_pct": 0.1, "on_positive": True, "points": None},
    "design": {"interactions": "pairwise", "z_encoding": "linear", "y_on_positive_only": True},
    "overhead": 200.0,
    "bootstrap": {"scheme": "multinomial", "replicates": 300, "seed": 17, "level": 0.95},
    "split": {"train_fraction": 0.7, "seed": 42},
    "output_dir": "jointdr_out",
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        elif value is not None:
            out[key] = value
    return out


def load_config(config_path, overrides: dict) -> dict:
    config = dict(DEFAULT_CONFIG)
    if config_path:
        with open(config_path) as fh:
            config = _merge(config, json.load(fh))
    return _merge(config, overrides)


def resolve_workers(workers):
    if workers is not None:
        return int(workers)
    env = os.environ.get(WORKERS_ENV)
    return int(env) if env else None


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, outputs: list) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": _config_hash(config),
        "outputs": outputs,
        "versions": {
            "jointdr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "python": sys.version.split()[0],
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _emit_tables(out_dir, command, config, tables: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, frame in tables.items():
        path = out_dir / f"{name}.csv"
        frame.to_csv(path, index=False)
        written.append(path.name)
    write_manifest(out_dir, command, config, written)
    click.echo(f"wrote {', '.join(written)} and manifest.json to {out_dir}")


def _fail_json(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.ClickException, click.Abort, SystemExit):
            raise
        except Exception as exc:  # surface a machine-readable failure
            _fail_json(exc)

    return wrapper


def _load_inputs(config):
    if not config.get("input"):
        raise IngestError("no input file configured (set 'input' or pass --input)")
    cols = config["columns"]
    mapping = ColumnMapping(
        y=cols["y"],
        z=cols["z"],
        covariates=tuple(cols.get("covariates") or ()),
        categorical=tuple(cols.get("categorical") or ()),
    )
    return ingest(config["input"], mapping)


def _split(config, dataset, frame):
    split = config["split"]
    train_idx, val_idx = split_indices(dataset.n, split["train_fraction"], split["seed"])
    return (
        dataset.subset(train_idx),
        frame.iloc[train_idx].reset_index(drop=True),
        dataset.subset(val_idx),
        frame.iloc[val_idx].reset_index(drop=True),
    )


def _estimator_from_config(config, workers) -> DistributionRegression:
    grid = config["grid"]
    design = config["design"]
    interactions = design.get("interactions")
    if interactions in ("none", "null"):
        interactions = None
    return DistributionRegression(
        y_grid=grid.get("points"),
        y_probs=None if grid.get("points") else quantile_probs(grid["step_pct"]),
        grid_on_positive=grid.get("on_positive", True),
        link_y=config["links"]["y"],
        link_z=config["links"]["z"],
        interactions=interactions,
        z_encoding=design.get("z_encoding", "linear"),
        fit_y_positive_only=design.get("y_on_positive_only", True),
        n_jobs=workers,
    )


def _load_model(path) -> DistributionRegression:
    return DistributionRegression.from_json(Path(path).read_text())


def _load_baselines(pg_path, copula_path):
    pg = PoissonGammaRegression.from_json(Path(pg_path).read_text()) if pg_path else None
    cop = (
        GaussianCopulaRegression.from_json(Path(copula_path).read_text())
        if copula_path
        else None
    )
    return pg, cop


def _pick_split(which, dataset, frame, config):
    train_ds, train_frame, val_ds, val_frame = _split(config, dataset, frame)
    return (train_ds, train_frame) if which == "train" else (val_ds, val_frame)


# --------------------------------------------------------------------- click


def common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                     help="JSON config file; flags override its keys."),
        click.option("--input", "input_path", type=click.Path(exists=True), default=None),
        click.option("--y-col", default=None, help="Continuous outcome column."),
        click.option("--z-col", default=None, help="Count outcome column."),
        click.option("--covariates", default=None, help="Comma-separated covariate columns."),
        click.option("--categorical", default=None,
                     help="Comma-separated categorical covariate columns."),
        click.option("--train-fraction", type=float, default=None),
        click.option("--split-seed", type=int, default=None),
        click.option("--overhead", type=float, default=None,
                     help="Fixed handling cost per claim in the total cost."),
        click.option("--grid-step-pct", type=float, default=None,
                     help="Quantile step (percent) for the automatic threshold grid."),
        click.option("--grid-on-all", is_flag=True, default=False,
                     help="Build the grid from all outcome values, not only positive ones."),
        click.option("--interactions", default=None,
                     help="'pairwise', 'none', or JSON list of column index pairs."),
        click.option("--z-encoding", default=None, type=click.Choice(["linear", "dummies"])),
        click.option("--replicates", type=int, default=None, help="Bootstrap replicates."),
        click.option("--scheme", default=None, type=click.Choice(["multinomial", "exponential"])),
        click.option("--bootstrap-seed", type=int, default=None),
        click.option("--workers", type=int, default=None,
                     help=f"Worker count; default from ${WORKERS_ENV}."),
        click.option("--out", "output_dir", default=None, help="Output directory."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _overrides_from_flags(kw) -> dict:
    interactions = kw.get("interactions")
    if interactions and interactions.startswith("["):
        interactions = json.loads(interactions)
    covariates = kw.get("covariates")
    categorical = kw.get("categorical")
    return {
        "input": kw.get("input_path"),
        "columns": {
            "y": kw.get("y_col"),
            "z": kw.get("z_col"),
            "covariates": covariates.split(",") if covariates else None,
            "categorical": categorical.split(",") if categorical else None,
        },
        "grid": {
            "step_pct": kw.get("grid_step_pct"),
            "on_positive": False if kw.get("grid_on_all") else None,
        },
        "design": {"interactions": interactions, "z_encoding": kw.get("z_encoding")},
        "overhead": kw.get("overhead"),
        "bootstrap": {
            "scheme": kw.get("scheme"),
            "replicates": kw.get("replicates"),
            "seed": kw.get("bootstrap_seed"),
        },
        "split": {
            "train_fraction": kw.get("train_fraction"),
            "seed": kw.get("split_seed"),
        },
        "output_dir": kw.get("output_dir"),
    }


@click.group()
@click.version_option(__version__)
def main():
    """Joint distribution regression for claim frequency and severity."""


@main.command()
@click.option("--dgp", "kind", required=True,
              type=click.Choice(["poisson_gamma", "gaussian_copula", "truncated_normal"]))
@click.option("--case", type=click.Choice(["1", "2"]), default="1")
@click.option("--n", type=int, default=2000)
@click.option("--seed", type=int, default=0)
@click.option("--dgp3-ceil", is_flag=True, default=False,
              help="Bin the truncated-normal count by ceiling instead of floor.")
@click.option("--out", "out_path", required=True, type=click.Path())
@cli_errors
def simulate(kind, case, n, seed, dgp3_ceil, out_path):
    """Generate a synthetic dataset and write it as CSV."""
    spec = dgp_preset(kind, int(case), n=n, seed=seed, z_from_floor=not dgp3_ceil)
    dataset = generate(spec)
    export_csv(dataset, out_path)
    click.echo(f"wrote {n} rows to {out_path}")


@main.command()
@common_options
@click.option("--baselines/--no-baselines", default=True,
              help="Also fit and serialize the two parametric baselines.")
@cli_errors
def fit(baselines, **kw):
    """Fit the model on the training split and serialize it."""
    config = load_config(kw["config_path"], _overrides_from_flags(kw))
    workers = resolve_workers(kw["workers"])
    dataset, frame = _load_inputs(config)
    train_ds, _, _, _ = _split(config, dataset, frame)
    model = _estimator_from_config(config, workers).fit(train_ds.x, train_ds.y, train_ds.z)

    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["model.json", "fit_report.csv"]
    (out_dir / "model.json").write_text(model.to_json())
    fit_report(model).to_csv(out_dir / "fit_report.csv", index=False)
    if baselines:
        pg = PoissonGammaRegression().fit(train_ds.x, train_ds.y, train_ds.z)
        cop = GaussianCopulaRegression().fit(train_ds.x, train_ds.y, train_ds.z)
        (out_dir / "pg_model.json").write_text(pg.to_json())
        (out_dir / "copula_model.json").write_text(cop.to_json())
        outputs += ["pg_model.json", "copula_model.json"]
    write_manifest(out_dir, "fit", config, outputs)
    click.echo(f"wrote {', '.join(outputs)} to {out_dir}")


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--pg-model", "pg_path", type=click.Path(exists=True), default=None)
@click.option("--copula-model", "copula_path", type=click.Path(exists=True), default=None)
@click.option("--split", "which", type=click.Choice(["train", "validation"]), default="train")
@cli_errors
def gof(model_path, pg_path, copula_path, which, **kw):
    """Observed vs fitted claim-frequency table with chi-square statistics."""
    config = load_config(kw["config_path"], _overrides_from_flags(kw))
    dataset, frame = _load_inputs(config)
    ds, _ = _pick_split(which, dataset, frame, config)
    model = _load_model(model_path)
    pg, cop = _load_baselines(pg_path, copula_path)
    table = gof_table(model, ds.x, ds.z, pg, cop)
    _emit_tables(config["output_dir"], "gof", config, {"gof": table})


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--pg-model", "pg_path", type=click.Path(exists=True), default=None)
@click.option("--copula-model", "copula_path", type=click.Path(exists=True), default=None)
@click.option("--target", type=click.Choice(["y_positive", "s_positive", "c"]),
              default="y_positive")
@click.option("--split", "which", type=click.Choice(["train", "validation"]),
              default="validation")
@click.option("--sim-per-row", type=int, default=5,
              help="Baseline simulation draws per covariate row.")
@cli_errors
def cdf(model_path, pg_path, copula_path, target, which, sim_per_row, **kw):
    """Model vs empirical CDF table for one distribution target."""
    config = load_config(kw["config_path"], _overrides_from_flags(kw))
    dataset, frame = _load_inputs(config)
    ds, _ = _pick_split(which, dataset, frame, config)
    model = _load_model(model_path)
    pg, cop = _load_baselines(pg_path, copula_path)
    joint = JointModel(model, config["overhead"])
    table = cdf_table(
        joint, ds.x, ds.y, ds.z, target,
        pg_model=pg, copula_model=cop,
        sim_per_row=sim_per_row, seed=config["bootstrap"]["seed"],
    )
    _emit_tables(config["output_dir"], "cdf", config, {f"cdf_{target}": table})


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--pg-model", "pg_path", type=click.Path(exists=True), default=None)
@click.option("--copula-model", "copula_path", type=click.Path(exists=True), default=None)
@click.option("--taus", default="0.98,0.99", help="Comma-separated quantile levels.")
@click.option("--cohort", "cohort_specs", multiple=True,
              help="label:PANDAS_QUERY over input columns; repeatable. Default: all rows.")
@click.option("--split", "which", type=click.Choice(["train", "validation"]),
              default="validation")
@click.option("--sim-per-row", type=int, default=10)
@cli_errors
def var(model_path, pg_path, copula_path, taus, cohort_specs, which, sim_per_row, **kw):
    """Cohort value-at-risk table with bootstrap confidence intervals."""
    config = load_config(kw["config_path"], _overrides_from_flags(kw))
    dataset, frame = _load_inputs(config)
    ds, split_frame = _pick_split(which, dataset, frame, config)
    model = _load_model(model_path)
    pg, cop = _load_baselines(pg_path, copula_path)
    joint = JointModel(model, config["overhead"])

    cohorts = {}
    for spec in cohort_specs or ("all:",):
        label, _, query = spec.partition(":")
        cohorts[label or "all"] = query
    tau_list = [float(t) for t in taus.split(",")]

    boot = config["bootstrap"]
    table = var_table(
        joint, ds.x, ds.y, ds.z, split_frame, cohorts, tau_list,
        level=boot.get("level", 0.95),
        scheme=WeightScheme(kind=boot["scheme"], seed=boot["seed"]),
        n_replicates=boot["replicates"],
        pg_model=pg, copula_model=cop,
        sim_per_row=sim_per_row, seed=boot["seed"],
    )
    _emit_tables(config["output_dir"], "var", config, {"var": table})


@main.command()
@click.option("--dgp", "kind", required=True,
              type=click.Choice(["poisson_gamma", "gaussian_copula", "truncated_normal"]))
@click.option("--case", type=click.Choice(["1", "2"]), default="1")
@click.option("--n", type=int, default=2000)
@click.option("--reps", type=int, default=100)
@click.option("--taus", default="0.95")
@click.option("--x1", "x1_values", default="0.25,0.5,0.75")
@click.option("--estimators", default="dr,poisson_gamma,copula")
@click.option("--overhead", type=float, default=1.0)
@click.option("--seed", type=int, default=0)
@click.option("--truth-sims", type=int, default=1_000_000)
@click.option("--estimator-sims", type=int, default=200_000)
@click.option("--dgp3-ceil", is_flag=True, default=False)
@click.option("--workers", type=int, default=None)
@click.option("--out", "output_dir", default="jointdr_out")
@cli_errors
def compare(kind, case, n, reps, taus, x1_values, estimators, overhead, seed,
            truth_sims, estimator_sims, dgp3_ceil, workers, output_dir):
    """Monte Carlo bias/MSE comparison of the estimators against the truth."""
    config = CompareConfig(
        kind=kind,
        case=int(case),
        n=n,
        n_reps=reps,
        taus=tuple(float(t) for t in taus.split(",")),
        x1_values=tuple(float(v) for v in x1_values.split(",")),
        estimators=tuple(estimators.split(",")),
        overhead=overhead,
        seed=seed,
        truth_sims=truth_sims,
        estimator_sims=estimator_sims,
        z_from_floor=not dgp3_ceil,
    )
    table = compare_table(config, n_jobs=resolve_workers(workers))
    manifest_config = {"compare": config.__dict__}
    _emit_tables(output_dir, "compare", manifest_config, {"compare": table})


if __name__ == "__main__":
    main()
