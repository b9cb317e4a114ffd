"""Logit and probit link functions with saturation-safe evaluation.

Every threshold regression in this package is a binary MLE through one of
these links.  Besides the CDF ``cdf(u)`` and its density ``pdf(u)``, the
solver needs the ratio ``R(u) = pdf(u) / (cdf(u) * (1 - cdf(u)))`` that
appears in the score equations, and the per-observation log-likelihood
curvature.  All quantities are evaluated in log space near saturation so
they stay finite for |u| well beyond 35 (direct evaluation of the probit
ratio breaks down around |u| ~ 8 because cdf*(1-cdf) underflows).
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np
from scipy.special import expit, log_expit, log_ndtr, ndtr

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class LinkValues(NamedTuple):
    """CDF, density, and score ratio of a link at a point."""

    cdf: Union[float, np.ndarray]
    pdf: Union[float, np.ndarray]
    ratio: Union[float, np.ndarray]


class Link:
    """Base class; concrete links implement the per-point primitives."""

    kind: str = ""

    def cdf(self, u):
        raise NotImplementedError

    def pdf(self, u):
        raise NotImplementedError

    def log_cdf(self, u):
        raise NotImplementedError

    def log_sf(self, u):
        raise NotImplementedError

    def ratio(self, u):
        raise NotImplementedError

    def score_factor(self, u, t):
        """d/du of ``t*log(cdf) + (1-t)*log(1-cdf)``, i.e. R(u)*(t - cdf(u))."""
        raise NotImplementedError

    def curvature(self, u, t):
        """Negative second derivative of the per-observation log-likelihood.

        Strictly positive for both links (the binary log-likelihood is
        concave in the linear index), which makes the Newton direction an
        ascent direction whenever the design has full column rank.
        """
        raise NotImplementedError

    def fit_terms(self, u, t):
        """(score_factor, curvature) pair; overridable to share work."""
        return self.score_factor(u, t), self.curvature(u, t)

    def evaluate(self, u) -> LinkValues:
        """Return (cdf, pdf, ratio) at ``u``; rejects non-finite input."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("link evaluation requires finite input")
        if u.ndim == 0:
            u = float(u)
            return LinkValues(float(self.cdf(u)), float(self.pdf(u)), float(self.ratio(u)))
        return LinkValues(self.cdf(u), self.pdf(u), self.ratio(u))

    def __repr__(self):
        return f"{type(self).__name__}()"


class LogitLink(Link):
    """Standard logistic link; R(u) is identically 1."""

    kind = "logit"

    def cdf(self, u):
        return expit(u)

    def pdf(self, u):
        # expit(u)*expit(-u) stays accurate at both tails
        return expit(u) * expit(-u)

    def log_cdf(self, u):
        return log_expit(u)

    def log_sf(self, u):
        return log_expit(-u)

    def ratio(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def score_factor(self, u, t):
        return t - expit(u)

    def curvature(self, u, t):
        return self.pdf(u)

    def fit_terms(self, u, t):
        sigma = expit(u)
        return t - sigma, sigma * (1.0 - sigma)


class ProbitLink(Link):
    """Standard normal link; tail quantities via log-space erfc."""

    kind = "probit"

    def cdf(self, u):
        return ndtr(u)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * u * u - _LOG_SQRT_2PI)

    def log_cdf(self, u):
        return log_ndtr(u)

    def log_sf(self, u):
        return log_ndtr(-np.asarray(u, dtype=float))

    def _log_pdf(self, u):
        return -0.5 * u * u - _LOG_SQRT_2PI

    def _mills_lower(self, u):
        # pdf(u) / cdf(u)
        return np.exp(self._log_pdf(u) - log_ndtr(u))

    def _mills_upper(self, u):
        # pdf(u) / (1 - cdf(u))
        return np.exp(self._log_pdf(u) - log_ndtr(-u))

    def ratio(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(self._log_pdf(u) - log_ndtr(u) - log_ndtr(-u))

    def score_factor(self, u, t):
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        return t * self._mills_lower(u) - (1.0 - t) * self._mills_upper(u)

    def curvature(self, u, t):
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        m_lo = self._mills_lower(u)
        m_up = self._mills_upper(u)
        # both branches are positive: m_lo*(m_lo + u) and m_up*(m_up - u)
        return t * m_lo * (m_lo + u) + (1.0 - t) * m_up * (m_up - u)


_LINKS = {"logit": LogitLink(), "probit": ProbitLink()}


def get_link(link: Union[str, Link]) -> Link:
    """Resolve a link name ("logit" / "probit") or pass a Link through."""
    if isinstance(link, Link):
        return link
    try:
        return _LINKS[link]
    except KeyError:
        raise ValueError(f"unknown link {link!r}; expected one of {sorted(_LINKS)}") from None
