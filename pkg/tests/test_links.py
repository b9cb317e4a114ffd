import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdr import LogitLink, ProbitLink, get_link


def test_logit_at_zero():
    vals = LogitLink().evaluate(0.0)
    assert vals.cdf == pytest.approx(0.5)
    assert vals.pdf == pytest.approx(0.25)
    assert vals.ratio == pytest.approx(1.0)


def test_probit_at_zero_against_high_precision_oracle():
    # oracle: standard-normal identities evaluated at 50-digit precision
    mpmath.mp.dps = 50
    pdf0 = float(1 / mpmath.sqrt(2 * mpmath.pi))
    ratio0 = float((1 / mpmath.sqrt(2 * mpmath.pi)) / (mpmath.mpf("0.5") * mpmath.mpf("0.5")))
    vals = ProbitLink().evaluate(0.0)
    assert vals.cdf == pytest.approx(0.5, abs=1e-12)
    assert vals.pdf == pytest.approx(pdf0, rel=1e-10)
    assert vals.pdf == pytest.approx(0.3989, abs=5e-5)
    assert vals.ratio == pytest.approx(ratio0, rel=1e-10)
    assert vals.ratio == pytest.approx(1.5958, abs=5e-5)


def test_logit_ratio_identity_far_from_origin():
    assert LogitLink().evaluate(10.0).ratio == 1.0
    u = np.linspace(-30.0, 30.0, 2001)
    assert np.max(np.abs(LogitLink().ratio(u) - 1.0)) < 1e-12


@pytest.mark.parametrize("name", ["logit", "probit"])
def test_cdf_strictly_increasing(name):
    link = get_link(name)
    # strict where float64 resolves consecutive increments near 1
    u = np.linspace(-6.0, 6.0, 4001)
    cdf = link.cdf(u)
    assert np.all(np.diff(cdf) > 0)
    wide = link.cdf(np.linspace(-30.0, 30.0, 4001))
    assert np.all(np.diff(wide) >= 0)
    assert np.all(wide >= 0.0) and np.all(wide <= 1.0)


def test_logit_pdf_matches_central_difference():
    link = get_link("logit")
    u = np.linspace(-8.0, 8.0, 321)
    h = 1e-5
    numeric = (link.cdf(u + h) - link.cdf(u - h)) / (2 * h)
    rel = np.abs(link.pdf(u) - numeric) / np.abs(numeric)
    assert np.max(rel) < 1e-6


def test_probit_pdf_matches_derivative():
    link = get_link("probit")
    h = 1e-5
    # left tail via the CDF, right tail via the survival function, so the
    # finite difference always acts on well-resolved small numbers
    u_left = np.linspace(-6.0, 0.0, 121)
    numeric_left = (link.cdf(u_left + h) - link.cdf(u_left - h)) / (2 * h)
    rel_left = np.abs(link.pdf(u_left) - numeric_left) / numeric_left
    u_right = np.linspace(0.0, 6.0, 121)
    sf = lambda v: np.exp(link.log_sf(v))
    numeric_right = -(sf(u_right + h) - sf(u_right - h)) / (2 * h)
    rel_right = np.abs(link.pdf(u_right) - numeric_right) / numeric_right
    assert max(np.max(rel_left), np.max(rel_right)) < 1e-6
    # far tail: differentiate at 50-digit precision
    mpmath.mp.dps = 50
    for point in (-8.0, -7.0, 6.5, 7.0, 8.0):
        exact = float(mpmath.diff(mpmath.ncdf, point))
        assert abs(link.pdf(point) - exact) / exact < 1e-9


@pytest.mark.parametrize("name", ["logit", "probit"])
def test_saturation_stability(name):
    link = get_link(name)
    for u in (-35.0, 35.0):
        vals = link.evaluate(u)
        assert np.isfinite(vals.pdf) and vals.pdf >= 0
        assert np.isfinite(vals.ratio) and vals.ratio > 0
        assert 0.0 <= vals.cdf <= 1.0
        assert np.isfinite(link.log_cdf(u))
        assert np.isfinite(link.log_sf(u))


@pytest.mark.parametrize("name", ["logit", "probit"])
def test_curvature_positive_and_matches_score_derivative(name):
    link = get_link(name)
    u = np.linspace(-6.0, 6.0, 41)
    h = 1e-5
    for t in (0.0, 1.0):
        curv = link.curvature(u, np.full_like(u, t))
        assert np.all(curv > 0)
        numeric = -(link.score_factor(u + h, t) - link.score_factor(u - h, t)) / (2 * h)
        assert np.max(np.abs(curv - numeric) / np.maximum(np.abs(numeric), 1e-12)) < 1e-4


def test_non_finite_input_rejected():
    with pytest.raises(ValueError):
        LogitLink().evaluate(np.nan)
    with pytest.raises(ValueError):
        ProbitLink().evaluate(np.inf)


def test_unknown_link_rejected():
    with pytest.raises(ValueError):
        get_link("cauchit")


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_logit_monotone_property(u1, u2):
    link = get_link("logit")
    if u1 + 1e-9 < u2:  # below float resolution the CDFs legitimately tie
        assert link.cdf(u1) < link.cdf(u2)
