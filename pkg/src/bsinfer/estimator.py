"""scikit-learn style front end for Birnbaum-Saunders regression."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .mle import FitOptions, fit_full
from .model import Dataset
from .testing import bootstrap_test, lr_test

__all__ = ["BirnbaumSaundersRegressor"]


class BirnbaumSaundersRegressor(RegressorMixin, BaseEstimator):
    """Log-linear Birnbaum-Saunders regression fitted by maximum likelihood.

    The response ``y`` satisfies ``y = X beta + e`` with ``e`` sinh-normal
    ``SN(alpha, 0, 2)``.  With ``log_response=True`` the targets passed to
    :meth:`fit` are lifetimes ``T > 0`` and ``y = log T``; :meth:`predict` then
    returns the fitted median lifetime ``exp(X beta)``.

    Parameters
    ----------
    fit_intercept : bool
        Prepend a column of ones to ``X``.
    log_response : bool
        Treat targets as lifetimes and model their logarithm.
    grad_tol, max_iter, ls_shrink
        Optimiser settings, see :class:`bsinfer.mle.FitOptions`.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
        0.0 when ``fit_intercept=False``.
    alpha_ : float
        Shape parameter estimate.
    std_errors_ : ndarray of shape (n_params + 1,)
        Standard errors of the design coefficients (intercept first when
        fitted) followed by that of ``alpha_``.
    loglik_, converged_, n_iter_, dataset_
    """

    def __init__(
        self,
        fit_intercept: bool = True,
        log_response: bool = False,
        grad_tol: float = 1e-8,
        max_iter: int = 200,
        ls_shrink: float = 0.5,
    ):
        self.fit_intercept = fit_intercept
        self.log_response = log_response
        self.grad_tol = grad_tol
        self.max_iter = max_iter
        self.ls_shrink = ls_shrink

    def _options(self) -> FitOptions:
        return FitOptions(grad_tol=self.grad_tol, max_iter=self.max_iter, ls_shrink=self.ls_shrink)

    def _design(self, X: np.ndarray) -> np.ndarray:
        if self.fit_intercept:
            return np.column_stack([np.ones(X.shape[0]), X])
        return X

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.log_response:
            if np.any(y <= 0):
                raise ValueError("log_response=True needs strictly positive targets")
            y = np.log(y)
        n_coef = X.shape[1] + bool(self.fit_intercept)
        if X.shape[0] <= n_coef:
            raise ValueError(
                f"n_samples = {X.shape[0]} must exceed the number of coefficients ({n_coef})"
            )
        self.dataset_ = Dataset(y, self._design(X))
        res = fit_full(self.dataset_, self._options())
        beta = res.theta_hat.beta
        if self.fit_intercept:
            self.intercept_, self.coef_ = float(beta[0]), beta[1:].copy()
        else:
            self.intercept_, self.coef_ = 0.0, beta.copy()
        self.alpha_ = res.theta_hat.alpha
        self.std_errors_ = res.std_errors
        self.loglik_ = res.loglik
        self.converged_ = res.converged
        self.n_iter_ = res.iterations
        self.n_features_in_ = X.shape[1]
        if not res.converged:
            warnings.warn(
                f"maximum likelihood fit stopped after {res.iterations} iterations "
                f"(max |gradient| = {res.grad_norm:.3g})",
                ConvergenceWarning,
                stacklevel=2,
            )
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"is expecting {self.n_features_in_} features as input"
            )
        mu = X @ self.coef_ + self.intercept_
        return np.exp(mu) if self.log_response else mu

    def lr_test(self, hypothesis, **kwargs):
        """Likelihood ratio test on the training data.

        Coefficient indices in ``hypothesis`` refer to columns of the internal
        design, so index 0 is the intercept when ``fit_intercept=True``.
        """
        check_is_fitted(self, "dataset_")
        return lr_test(self.dataset_, hypothesis, self._options(), **kwargs)

    def bootstrap_test(self, hypothesis, B: int = 600, seed: int | None = None, **kwargs):
        check_is_fitted(self, "dataset_")
        return bootstrap_test(self.dataset_, hypothesis, B=B, seed=seed, opts=self._options(), **kwargs)
