"""CSV ingestion, column mapping, and deterministic sample splitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .data import Dataset


class IngestError(ValueError):
    """Input file violates the declared column mapping."""


def _describe_rows(mask: pd.Series, limit: int = 8) -> str:
    rows = [int(r) for r in np.flatnonzero(np.asarray(mask))[:limit]]
    suffix = ", ..." if int(mask.sum()) > limit else ""
    return f"rows {rows}{suffix} (0-based, excluding header)"


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns play which role."""

    y: str
    z: str
    covariates: tuple = ()
    categorical: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        overlap = set(self.categorical) - set(self.covariates)
        if overlap:
            raise IngestError(f"categorical columns {sorted(overlap)} not among covariates")
        if self.y == self.z:
            raise IngestError("y and z must be different columns")


def ingest(path, mapping: ColumnMapping) -> tuple:
    """Read a CSV into a Dataset plus the raw frame used for cohort filters.

    Numeric covariates are parsed as floats, declared categorical columns are
    one-hot expanded dropping the first (sorted) level, and an explicit
    intercept column is prepended.  Rows with missing or unparsable cells are
    rejected with their row numbers; the count column must hold non-negative
    integers.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    needed = [mapping.y, mapping.z, *mapping.covariates]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise IngestError(f"missing columns {missing}; file has {list(frame.columns)}")
    frame = frame[needed]

    na_mask = frame.isna().any(axis=1)
    if na_mask.any():
        raise IngestError(f"missing values at {_describe_rows(na_mask)}")

    numeric_cols = [mapping.y, mapping.z] + [
        c for c in mapping.covariates if c not in mapping.categorical
    ]
    parsed = {}
    for col in numeric_cols:
        vals = pd.to_numeric(frame[col], errors="coerce")
        bad = vals.isna()
        if bad.any():
            raise IngestError(f"unparsable numeric cells in {col!r} at {_describe_rows(bad)}")
        parsed[col] = vals.to_numpy(dtype=float)

    z = parsed[mapping.z]
    nonint = (z != np.round(z)) | (z < 0)
    if nonint.any():
        raise IngestError(
            f"count column {mapping.z!r} must hold non-negative integers; "
            f"violations at {_describe_rows(pd.Series(nonint))}"
        )

    blocks = [np.ones((len(frame), 1))]
    names = ["intercept"]
    for col in mapping.covariates:
        if col in mapping.categorical:
            levels = sorted(frame[col].astype(str).unique())
            if len(levels) < 2:
                raise IngestError(f"categorical column {col!r} has a single level {levels}")
            for level in levels[1:]:  # first sorted level is the reference
                blocks.append((frame[col].astype(str) == level).to_numpy(float)[:, None])
                names.append(f"{col}__{level}")
        else:
            blocks.append(parsed[col][:, None])
            names.append(col)

    x = np.hstack(blocks)
    dataset = Dataset(x, parsed[mapping.y], z.astype(np.int64), tuple(names))
    return dataset, frame


def export_csv(dataset: Dataset, path, include_intercept: bool = False) -> None:
    """Write a dataset back to CSV (full float precision, round-trippable)."""
    cols = {}
    for j, name in enumerate(dataset.covariate_names):
        if name == "intercept" and not include_intercept:
            continue
        cols[name] = dataset.x[:, j]
    cols["y"] = dataset.y
    cols["z"] = dataset.z
    pd.DataFrame(cols).to_csv(path, index=False, float_format="%.17g")


def split_indices(n: int, train_fraction: float, seed: int) -> tuple:
    """Deterministic exact partition of range(n) into train/validation."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.Generator(np.random.Philox(key=[int(seed), int(n)]))
    perm = rng.permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def cohort_mask(frame: pd.DataFrame, query: str) -> np.ndarray:
    """Boolean positional row mask from a pandas query over the raw columns."""
    if not query or query.strip() in ("", "*", "all"):
        return np.ones(len(frame), dtype=bool)
    positional = frame.reset_index(drop=True)
    selected = positional.query(query)
    mask = np.zeros(len(frame), dtype=bool)
    mask[selected.index.to_numpy()] = True
    return mask
