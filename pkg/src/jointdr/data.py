"""Immutable sample container for (covariates, continuous, discrete) triples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def find_intercept_column(x: np.ndarray) -> int:
    """Index of the unique constant-one column; raises if absent/duplicated."""
    is_one = [bool(np.all(x[:, j] == 1.0)) for j in range(x.shape[1])]
    hits = [j for j, flag in enumerate(is_one) if flag]
    if len(hits) != 1:
        raise ValueError(
            f"expected exactly one constant-one intercept column, found {len(hits)}"
        )
    return hits[0]


@dataclass(frozen=True)
class Dataset:
    """A sample of n rows: covariate matrix x, continuous y, discrete z.

    ``x`` must contain an explicit intercept column (checked unless
    ``check_intercept=False`` at construction); ``z`` must hold non-negative
    integers with a finite support set.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        z = np.ascontiguousarray(self.z)
        if x.ndim != 2:
            raise ValueError("x must be a 2-D matrix")
        n = x.shape[0]
        if n < 1:
            raise ValueError("empty sample")
        if y.shape != (n,) or z.shape != (n,):
            raise ValueError("x, y, z must share the same number of rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite entries in x or y")
        zf = z.astype(float)
        if not np.all(np.isfinite(zf)):
            raise ValueError("non-finite entries in z")
        if np.any(zf != np.round(zf)) or np.any(zf < 0):
            raise ValueError("z must contain non-negative integers")
        z = zf.astype(np.int64)
        names = tuple(self.covariate_names) or tuple(f"x{j}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ValueError("covariate_names length must match x columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "covariate_names", names)
        x.setflags(write=False)
        y.setflags(write=False)
        z.setflags(write=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def z_support(self) -> np.ndarray:
        return np.unique(self.z)

    def intercept_column(self) -> int:
        return find_intercept_column(self.x)

    def validate_intercept(self) -> "Dataset":
        find_intercept_column(self.x)
        return self

    def subset(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask)
        return Dataset(self.x[mask], self.y[mask], self.z[mask], self.covariate_names)
