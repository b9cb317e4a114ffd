"""Weighted binary maximum likelihood by Newton's method.

This is the single solver behind every threshold regression and every
bootstrap refit.  The weighted log-likelihood

    l(b) = sum_i w_i * [t_i * log(cdf(x_i'b)) + (1 - t_i) * log(1 - cdf(x_i'b))]

is concave for the logit and probit links, so a full Newton step with
step-halving (halve until the likelihood stops decreasing) reaches the
global maximum from any start; we start at zero.  Thresholds whose labels
are constant on the positively weighted rows short-circuit to a degenerate
status without iterating: the caller substitutes the constant CDF 0 or 1.
Monotone likelihoods (quasi-separation) are caught by a cap on the
coefficient norm and flagged as non-converged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .links import Link, get_link

COEF_NORM_CAP = 1e3
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
_MAX_HALVINGS = 30
# separated thresholds make the Newton direction blow up along the index;
# capping the initial per-observation index step keeps ascent cheap there
# while leaving well-conditioned steps (full Newton) untouched
_MAX_INDEX_STEP = 10.0


class FitStatus(str, enum.Enum):
    CONVERGED = "converged"
    DEGENERATE_ALL_ZERO = "degenerate_all_zero"
    DEGENERATE_ALL_ONE = "degenerate_all_one"
    MAX_ITERATIONS = "max_iterations"
    RANK_DEFICIENT = "rank_deficient"

    def is_degenerate(self) -> bool:
        return self in (FitStatus.DEGENERATE_ALL_ZERO, FitStatus.DEGENERATE_ALL_ONE)


@dataclass
class BinaryFitResult:
    coef: np.ndarray
    status: FitStatus
    iterations: int = 0
    final_score_norm: float = np.nan

    @property
    def converged(self) -> bool:
        return self.status == FitStatus.CONVERGED


def weighted_loglik(design, labels, weights, coef, link: Link) -> float:
    u = design @ coef
    return float(np.sum(weights * (labels * link.log_cdf(u) + (1.0 - labels) * link.log_sf(u))))


def weighted_score(design, labels, weights, coef, link: Link) -> np.ndarray:
    """Gradient of the weighted log-likelihood at ``coef``."""
    u = design @ coef
    return design.T @ (weights * link.score_factor(u, labels))


def fit_binary_mle(
    design: np.ndarray,
    labels: np.ndarray,
    weights: Optional[np.ndarray] = None,
    *,
    link: Union[str, Link] = "logit",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    check_rank: bool = True,
) -> BinaryFitResult:
    """Maximize the weighted binary log-likelihood.

    At convergence the weighted score sum_i w_i*(cdf(x_i'b) - t_i)*R(x_i'b)*x_i
    has sup-norm <= tol.  Returns a degenerate status (without iterating) when
    the positively weighted labels are all 0 or all 1, RANK_DEFICIENT when the
    design loses column rank on the support of positive weights, and
    MAX_ITERATIONS (coefficients still populated) on non-convergence.
    """
    link = get_link(link)
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise ValueError("design must be 2-D")
    n, p = design.shape
    labels = np.asarray(labels, dtype=float).reshape(n)
    if np.any((labels != 0.0) & (labels != 1.0)):
        raise ValueError("labels must be 0/1")
    if weights is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(weights, dtype=float).reshape(n)
        if np.any(weights < 0.0):
            raise ValueError("weights must be non-negative")
    if weights.sum() <= 0.0:
        raise ValueError("weights must have positive total mass")

    # zero-weight rows contribute nothing; dropping them also keeps the
    # degeneracy and rank checks tied to the effective sample
    if np.any(weights == 0.0):
        keep = weights > 0.0
        design, labels, weights = design[keep], labels[keep], weights[keep]

    if np.all(labels == 0.0):
        return BinaryFitResult(np.zeros(p), FitStatus.DEGENERATE_ALL_ZERO)
    if np.all(labels == 1.0):
        return BinaryFitResult(np.zeros(p), FitStatus.DEGENERATE_ALL_ONE)

    if check_rank and np.linalg.matrix_rank(design) < p:
        return BinaryFitResult(np.full(p, np.nan), FitStatus.RANK_DEFICIENT)

    # the labels are fixed across iterations, so evaluate each observation's
    # log-likelihood through the single branch it actually uses
    pos = labels == 1.0
    neg = ~pos
    w_pos = weights[pos]
    w_neg = weights[neg]

    def loglik_at(u):
        return float(w_pos @ link.log_cdf(u[pos]) + w_neg @ link.log_sf(u[neg]))

    coef = np.zeros(p)
    u = design @ coef
    loglik = loglik_at(u)
    score_norm = np.inf
    for iteration in range(1, max_iter + 1):
        score_factor, curvature = link.fit_terms(u, labels)
        score = design.T @ (weights * score_factor)
        score_norm = float(np.max(np.abs(score)))
        if score_norm <= tol:
            return BinaryFitResult(coef, FitStatus.CONVERGED, iteration - 1, score_norm)

        curv = weights * curvature
        hessian = design.T @ (curv[:, None] * design)
        try:
            c_factor = scipy.linalg.cho_factor(hessian)
            direction = scipy.linalg.cho_solve(c_factor, score)
        except scipy.linalg.LinAlgError:
            if iteration == 1:
                # at coef=0 curvature is a positive constant, so a singular
                # Hessian can only come from a rank-deficient design
                return BinaryFitResult(np.full(p, np.nan), FitStatus.RANK_DEFICIENT)
            # saturated curvature under a monotone likelihood
            return BinaryFitResult(coef, FitStatus.MAX_ITERATIONS, iteration, score_norm)

        du = design @ direction
        step = min(1.0, _MAX_INDEX_STEP / max(float(np.max(np.abs(du))), 1e-300))
        # the summed likelihood carries O(n*eps) rounding noise, so accept
        # anything that does not decrease beyond that resolution; otherwise
        # near-optimal full steps get rejected and the search stalls
        slack = 1e-10 * (1.0 + abs(loglik))
        for _ in range(_MAX_HALVINGS):
            u_cand = u + step * du
            cand_loglik = loglik_at(u_cand)
            if cand_loglik >= loglik - slack:
                break
            step *= 0.5
        else:
            # no ascent possible at floating-point resolution
            return BinaryFitResult(coef, FitStatus.MAX_ITERATIONS, iteration, score_norm)
        coef = coef + step * direction
        u, loglik = u_cand, cand_loglik

        if np.linalg.norm(coef) > COEF_NORM_CAP:
            return BinaryFitResult(coef, FitStatus.MAX_ITERATIONS, iteration, score_norm)

    score = design.T @ (weights * link.score_factor(u, labels))
    return BinaryFitResult(coef, FitStatus.MAX_ITERATIONS, max_iter, float(np.max(np.abs(score))))
