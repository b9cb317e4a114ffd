import numpy as np
import pytest

from jointdr import Dataset
from jointdr.data import find_intercept_column


def _xyz(n=6):
    rng = np.random.default_rng(0)
    x = np.hstack([np.ones((n, 1)), rng.uniform(size=(n, 2))])
    return x, rng.exponential(size=n), rng.integers(0, 3, size=n)


def test_valid_dataset_roundtrip():
    x, y, z = _xyz()
    ds = Dataset(x, y, z, ("intercept", "a", "b"))
    assert ds.n == 6 and ds.d_x == 3
    assert ds.intercept_column() == 0
    assert ds.z.dtype == np.int64
    assert set(ds.z_support.tolist()) <= {0, 1, 2}


def test_arrays_frozen():
    x, y, z = _xyz()
    ds = Dataset(x, y, z)
    with pytest.raises(ValueError):
        ds.y[0] = 99.0


def test_length_mismatch():
    x, y, z = _xyz()
    with pytest.raises(ValueError):
        Dataset(x, y[:-1], z)


def test_non_finite_rejected():
    x, y, z = _xyz()
    y2 = y.copy()
    y2[0] = np.inf
    with pytest.raises(ValueError):
        Dataset(x, y2, z)


def test_non_integer_or_negative_z_rejected():
    x, y, z = _xyz()
    with pytest.raises(ValueError):
        Dataset(x, y, z.astype(float) + 0.5)
    with pytest.raises(ValueError):
        Dataset(x, y, z - 5)


def test_intercept_detection():
    x, y, z = _xyz()
    assert find_intercept_column(x) == 0
    with pytest.raises(ValueError):
        find_intercept_column(x[:, 1:])
    doubled = np.hstack([x, np.ones((x.shape[0], 1))])
    with pytest.raises(ValueError):
        find_intercept_column(doubled)


def test_subset():
    x, y, z = _xyz()
    ds = Dataset(x, y, z)
    sub = ds.subset(ds.z > 0)
    assert sub.n == int((z > 0).sum())
    assert np.all(sub.z > 0)
