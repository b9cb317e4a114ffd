import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import jointdr as jd
from jointdr import DistributionRegression, FitStatus, rearrange
from jointdr.dr import RankDeficientDesignError, resolve_interactions

from util import make_intercept_model


# ----------------------------------------------------------- rearrangement


def test_rearrange_sorts():
    assert rearrange([0.2, 0.5, 0.4, 0.9]).tolist() == [0.2, 0.4, 0.5, 0.9]


def test_rearrange_identity_on_monotone():
    vals = np.array([0.1, 0.4, 0.4, 0.8])
    assert rearrange(vals).tolist() == vals.tolist()


def test_rearrange_constant():
    assert rearrange([0.3, 0.3, 0.3]).tolist() == [0.3, 0.3, 0.3]


def test_rearrange_preserves_multiset_and_is_idempotent():
    rng = np.random.default_rng(2)
    vals = rng.uniform(size=17)
    out = rearrange(vals)
    assert sorted(out.tolist()) == sorted(vals.tolist())
    assert rearrange(out).tolist() == out.tolist()


def test_rearrange_rejects_out_of_range():
    with pytest.raises(ValueError):
        rearrange([0.2, 1.4])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_rearrange_never_increases_distance_to_monotone_truth(vals):
    # sorting is weakly closer (in L2) to any non-decreasing target
    rng = np.random.default_rng(0)
    truth = np.sort(rng.uniform(size=len(vals)))
    vals = np.array(vals)
    d_raw = np.sum((vals - truth) ** 2)
    d_sorted = np.sum((rearrange(vals) - truth) ** 2)
    assert d_sorted <= d_raw + 1e-12


# ------------------------------------------------------------- fitting


def _toy_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = np.hstack([np.ones((n, 1)), rng.uniform(size=(n, 2))])
    z = rng.poisson(np.exp(0.2 - 0.3 * x[:, 1])).astype(int)
    y = rng.gamma(2.0, np.exp(0.5 + 0.5 * x[:, 2] - 0.2 * z))
    return x, y, z


def test_top_slice_degenerate_all_one():
    x, y, z = _toy_data()
    est = DistributionRegression(y_grid=[y.max()]).fit(x, y, z)
    assert est.coef_path_.y_status == [FitStatus.DEGENERATE_ALL_ONE]
    for level in est.z_support_:
        assert est.cdf_y(x[0], int(level), y.max()) == 1.0


def test_step_conventions():
    x, y, z = _toy_data()
    est = DistributionRegression().fit(x, y, z)
    assert est.cdf_y(x[0], int(z[0]), est.y_grid_[0] - 1.0) == 0.0
    assert est.cdf_y(x[0], int(z[0]), est.y_grid_[-1]) == 1.0
    assert est.cdf_y(x[0], int(z[0]), est.y_grid_[-1] + 10.0) == 1.0


def test_hand_set_slice_rearranged_evaluation():
    # raw slice [0.3, 0.2, 0.8] over grid [1, 2, 3] sorts to [0.2, 0.3, 0.8]
    model = make_intercept_model(
        y_grid=[1.0, 2.0, 3.0],
        z_support=[0, 1],
        y_slices={0: [0.3, 0.2, 0.8], 1: [0.3, 0.2, 0.8]},
        z_cdf_values=[0.6],
    )
    assert model.cdf_y([1.0], 0, 2.0) == pytest.approx(0.3, abs=1e-9)
    assert model.cdf_y([1.0], 0, 1.0) == pytest.approx(0.2, abs=1e-9)
    assert model.cdf_y([1.0], 0, 0.5) == 0.0
    curve = model.cdf_y_curves(np.array([[1.0]]), 0)[0]
    assert np.allclose(curve, [0.2, 0.3, 0.8], atol=1e-9)


def test_cdf_z_rearrangement_and_pin():
    # raw values [0.9, 0.85] over support {0,1,2}; third pinned to 1
    model = make_intercept_model(
        y_grid=[1.0],
        z_support=[0, 1, 2],
        y_slices={0: [0.5], 1: [0.5], 2: [0.5]},
        z_cdf_values=[0.9, 0.85],
    )
    curve = model.cdf_z_curves(np.array([[1.0]]))[0]
    assert np.allclose(curve, [0.85, 0.9, 1.0], atol=1e-9)
    assert model.cdf_z([1.0], 2) == 1.0
    assert model.cdf_z([1.0], 0) == pytest.approx(0.85, abs=1e-9)
    # out-of-support conventions
    assert model.cdf_z([1.0], -1) == 0.0
    assert model.cdf_z([1.0], 7) == 1.0
    masses = model.pmf_z(np.array([[1.0]]))[0]
    assert np.all(masses >= 0)
    assert masses.sum() == pytest.approx(1.0)


def test_quantile_examples():
    # slice values sit clear of the queried levels so the expit/logit
    # round-trip of the hand construction cannot flip a knife-edge crossing
    model = make_intercept_model(
        y_grid=[10.0, 20.0, 30.0],
        z_support=[0, 1],
        y_slices={0: [0.5, 0.92, 1.0 - 1e-12], 1: [0.5, 0.92, 1.0 - 1e-12]},
        z_cdf_values=[0.5],
    )
    assert model.quantile_y([1.0], 0, 0.9) == 20.0
    assert model.quantile_y([1.0], 0, 0.95) == 30.0
    assert model.quantile_y([1.0], 0, 0.3) == 10.0
    with pytest.raises(ValueError):
        model.quantile_y([1.0], 0, 1.5)


def test_quantile_cdf_duality():
    x, y, z = _toy_data(seed=4)
    est = DistributionRegression().fit(x, y, z)
    level = int(z[0])
    for g in est.y_grid_[::7]:
        tau = est.cdf_y(x[3], level, g)
        if 0.0 < tau < 1.0:
            assert est.quantile_y(x[3], level, tau) <= g + 1e-12


def test_monotone_and_in_range_over_random_queries():
    x, y, z = _toy_data(seed=7)
    est = DistributionRegression(interactions="pairwise").fit(x, y, z)
    rng = np.random.default_rng(1)
    queries = np.hstack([np.ones((20, 1)), rng.uniform(size=(20, 2))])
    for level in est.z_support_:
        curves = est.cdf_y_curves(queries, int(level))
        assert np.all(np.diff(curves, axis=1) >= 0)
        assert np.all((curves >= 0) & (curves <= 1))
    zc = est.cdf_z_curves(queries)
    assert np.all(np.diff(zc, axis=1) >= 0)
    assert np.allclose(zc[:, -1], 1.0)


def test_intercept_only_pmf_matches_empirical_frequencies():
    rng = np.random.default_rng(12)
    n = 3000
    x = np.ones((n, 1))
    z = rng.integers(0, 4, size=n)
    y = rng.exponential(size=n)
    est = DistributionRegression(y_probs=[0.5, 1.0], check_intercept=True).fit(x, y, z)
    masses = est.pmf_z(np.array([[1.0]]))[0]
    freqs = np.array([(z == v).mean() for v in est.z_support_])
    assert np.allclose(masses, freqs, atol=1e-7)


def test_independence_alpha_near_zero():
    # Y independent of Z given X: alpha path should be statistically zero
    alphas = []
    for seed in range(12):
        rng = np.random.default_rng(100 + seed)
        n = 5000
        x = np.hstack([np.ones((n, 1)), rng.uniform(size=(n, 1))])
        z = rng.poisson(1.0, size=n)
        y = rng.gamma(2.0, np.exp(0.5 * x[:, 1]))
        est = DistributionRegression(y_probs=np.linspace(0.1, 0.9, 9)).fit(x, y, z)
        mid = est.coef_path_.alpha.shape[0] // 2
        alphas.append(est.coef_path_.alpha[mid, 0])
    alphas = np.array(alphas)
    se = alphas.std(ddof=1) / np.sqrt(alphas.size)
    assert abs(alphas.mean()) <= 3 * se + 1e-9


def test_single_covariate_logit_dgp_consistency():
    # F(y | x) = logistic CDF at (y - x), i.e. beta_x(y) = 1 for all y
    def fit_error(n, seed):
        rng = np.random.default_rng(seed)
        x = np.hstack([np.ones((n, 1)), rng.uniform(size=(n, 1))])
        y = rng.logistic(size=n) - x[:, 1]
        z = rng.integers(0, 2, size=n)  # independent of y; true alpha is 0
        est = DistributionRegression(y_probs=np.linspace(0.2, 0.8, 7)).fit(x, y, z)
        return np.median(np.abs(est.coef_path_.beta[:, 1] - 1.0))

    err_small = np.mean([fit_error(200, s) for s in range(5)])
    err_big = np.mean([fit_error(20000, s) for s in range(5)])
    assert err_big < err_small / 3
    assert err_big < 0.1


def test_rank_deficiency_propagates():
    x, y, z = _toy_data()
    x_bad = np.hstack([x, x[:, [1]]])
    with pytest.raises(RankDeficientDesignError):
        DistributionRegression().fit(x_bad, y, z)


def test_interactions_resolution_and_validation():
    assert resolve_interactions(None, 4, 0) == ()
    assert resolve_interactions("pairwise", 4, 0) == ((1, 2), (1, 3), (2, 3))
    assert resolve_interactions([(2, 1)], 4, 0) == ((1, 2),)
    with pytest.raises(ValueError):
        resolve_interactions([(0, 1)], 4, 0)
    with pytest.raises(ValueError):
        resolve_interactions([(1, 2), (2, 1)], 4, 0)
    with pytest.raises(ValueError):
        resolve_interactions([(1, 1)], 4, 0)
    with pytest.raises(ValueError):
        resolve_interactions([(1, 9)], 4, 0)


def test_z_interactions_fit_and_eval():
    x, y, z = _toy_data(seed=9)
    est = DistributionRegression(z_interactions=True).fit(x, y, z)
    assert est.design_spec_.z_interactions == (1, 2)
    val = est.cdf_y(x[0], int(z[0]), float(np.median(y)))
    assert 0.0 <= val <= 1.0
    with pytest.raises(ValueError):
        DistributionRegression(z_interactions=True, z_encoding="dummies").fit(x, y, z)


def test_dummy_encoding_matches_saturated_fit():
    x, y, z = _toy_data(seed=10)
    est = DistributionRegression(z_encoding="dummies", y_probs=[0.3, 0.6, 0.9]).fit(x, y, z)
    # one alpha column per support level above the smallest
    assert est.coef_path_.alpha.shape[1] == est.z_support_.size - 1
    for level in est.z_support_:
        curve = est.cdf_y_curves(x[:3], int(level))
        assert curve.shape == (3, 3)


def test_out_of_support_z_rejected_for_severity():
    x, y, z = _toy_data()
    est = DistributionRegression().fit(x, y, z)
    with pytest.raises(ValueError):
        est.cdf_y(x[0], int(z.max()) + 5, 1.0)


def test_positive_only_fit_defines_zero_slice_as_step():
    rng = np.random.default_rng(33)
    n = 2000
    x = np.hstack([np.ones((n, 1)), rng.uniform(size=(n, 1))])
    z = rng.poisson(0.8, size=n)
    y = np.where(z > 0, rng.gamma(2.0, 3.0, size=n), 0.0)
    est = DistributionRegression(fit_y_positive_only=True, grid_on_positive=True).fit(x, y, z)
    curves = est.cdf_y_curves(x[:4], 0)
    assert np.all(curves == 1.0)
    assert est.cdf_y(x[0], 0, -0.5) == 0.0


def test_sample_weights_shift_the_fit():
    x, y, z = _toy_data(seed=14)
    w = np.where(z > 0, 2.0, 1.0)
    a = DistributionRegression(y_probs=[0.5]).fit(x, y, z)
    b = DistributionRegression(y_probs=[0.5]).fit(x, y, z, sample_weight=w)
    assert not np.allclose(a.coef_path_.gamma, b.coef_path_.gamma)


def test_serialization_roundtrip_bit_exact():
    x, y, z = _toy_data(seed=5)
    est = DistributionRegression(interactions="pairwise").fit(x, y, z)
    doc = est.to_json()
    back = DistributionRegression.from_json(doc)
    assert back.y_grid_.tolist() == est.y_grid_.tolist()
    assert back.z_support_.tolist() == est.z_support_.tolist()
    assert back.coef_path_.y_status == est.coef_path_.y_status
    assert np.array_equal(back.coef_path_.alpha, est.coef_path_.alpha)
    assert np.array_equal(back.coef_path_.beta, est.coef_path_.beta)
    assert np.array_equal(back.coef_path_.gamma, est.coef_path_.gamma)
    # evaluation identical through the round trip
    q = x[5]
    for level in est.z_support_:
        assert back.cdf_y(q, int(level), 2.0) == est.cdf_y(q, int(level), 2.0)
    assert back.to_json() == doc


def test_sklearn_params_clone():
    from sklearn.base import clone

    est = DistributionRegression(interactions="pairwise", link_y="probit")
    cloned = clone(est)
    assert cloned.get_params()["link_y"] == "probit"
    assert cloned.get_params()["interactions"] == "pairwise"
