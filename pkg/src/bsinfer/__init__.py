"""Likelihood inference for Birnbaum-Saunders log-linear regression.

Maximum likelihood fitting, likelihood ratio tests with Bartlett-type
small-sample corrections, parametric bootstrap tests and the Monte Carlo
harness used to study their size and power.
"""

from __future__ import annotations

from .correction import BartlettFactor, bartlett_B, epsilon_general
from .exceptions import (
    BartlettFactorError,
    ConvergenceError,
    DegenerateDataError,
    RankDeficientError,
)
from .hypotheses import AlphaFixed, BetaFull, BetaSubset
from .mle import FitOptions, FitResult, fit_full, fit_restricted
from .model import Dataset, Theta, fisher_info, hat_stats, loglik, score
from .testing import BootstrapReport, TestReport, bootstrap_test, lr_test

__version__ = "0.1.0"

__all__ = [
    "AlphaFixed",
    "BartlettFactor",
    "BartlettFactorError",
    "BetaFull",
    "BetaSubset",
    "BirnbaumSaundersRegressor",
    "BootstrapReport",
    "ConvergenceError",
    "Dataset",
    "DegenerateDataError",
    "FitOptions",
    "FitResult",
    "RankDeficientError",
    "TestReport",
    "Theta",
    "bartlett_B",
    "bootstrap_test",
    "epsilon_general",
    "fisher_info",
    "fit_full",
    "fit_restricted",
    "hat_stats",
    "loglik",
    "lr_test",
    "score",
]


def __getattr__(name):
    # scikit-learn is slow to import; load the estimator on first use
    if name == "BirnbaumSaundersRegressor":
        from .estimator import BirnbaumSaundersRegressor

        return BirnbaumSaundersRegressor
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
