"""Semiparametric joint distribution regression for mixed outcome pairs.

Fits the conditional distributions of a discrete count and a continuous
outcome by per-threshold binary regressions, composes them into the joint
conditional law, and derives aggregate-claim / total-cost distributions,
conditional value-at-risk, exchangeable-bootstrap confidence intervals,
parametric baselines, and a Monte Carlo comparison harness.
"""

from .baselines import (
    GaussianCopulaRegression,
    PoissonGammaRegression,
    gaussian_copula_cdf,
    parametric_quantiles,
)
from .bootstrap import BootstrapResult, WeightScheme, bootstrap_fit, draw_weights, percentile_ci
from .data import Dataset
from .dgp import DgpSpec, TruthQuantiles, dgp_preset, generate, truth_quantiles
from .dr import (
    CoefficientPath,
    DesignSpec,
    DistributionRegression,
    RankDeficientDesignError,
    rearrange,
)
from .glm import BinaryFitResult, FitStatus, fit_binary_mle
from .grids import ThresholdGrid, empirical_quantiles, quantile_probs
from .joint import JointModel, population_average
from .links import LogitLink, ProbitLink, get_link

__version__ = "0.1.0"

__all__ = [
    "BinaryFitResult",
    "BootstrapResult",
    "CoefficientPath",
    "Dataset",
    "DesignSpec",
    "DgpSpec",
    "DistributionRegression",
    "FitStatus",
    "GaussianCopulaRegression",
    "JointModel",
    "LogitLink",
    "PoissonGammaRegression",
    "ProbitLink",
    "RankDeficientDesignError",
    "ThresholdGrid",
    "TruthQuantiles",
    "WeightScheme",
    "bootstrap_fit",
    "dgp_preset",
    "draw_weights",
    "empirical_quantiles",
    "fit_binary_mle",
    "gaussian_copula_cdf",
    "generate",
    "get_link",
    "parametric_quantiles",
    "percentile_ci",
    "population_average",
    "quantile_probs",
    "rearrange",
    "truth_quantiles",
]
