"""Birnbaum-Saunders log-linear regression: likelihood, score and information.

The model is ``y_i = x_i' beta + e_i`` with ``e_i ~ SN(alpha, 0, 2)``, where
``y_i`` is a log-lifetime.  With ``r_i = y_i - x_i' beta``::

    xi1_i = (2/alpha) cosh(r_i / 2),   xi2_i = (2/alpha) sinh(r_i / 2)
    loglik = -(n/2) log(8 pi) + sum(log xi1) - sum(xi2**2) / 2

The batched helpers at the bottom evaluate the log-likelihood and gradient for
many response vectors sharing one design; the optimiser in :mod:`bsinfer.mle`
is built on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_design, as_response, check_full_rank, orthonormal_basis
from .specfun import psi_set

__all__ = [
    "Dataset",
    "Theta",
    "HatStats",
    "xi_vectors",
    "loglik",
    "score",
    "fisher_info",
    "hat_stats",
]

_LOG_8PI = math.log(8.0 * math.pi)
_LOG2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Log-lifetimes ``y`` (length n) and a full-rank n x p design ``X``."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = as_response(self.y).copy()
        X = as_design(self.X).copy()
        n, p = X.shape
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} rows but X has {n}")
        if p < 1 or n <= p:
            raise ValueError(f"need n > p >= 1, got n={n}, p={p}")
        check_full_rank(X)
        y.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_response(self, y) -> "Dataset":
        return Dataset(y, self.X)


@dataclass(frozen=True, eq=False)
class Theta:
    beta: np.ndarray
    alpha: float

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        if beta.ndim != 1:
            raise ValueError("beta must be a vector")
        alpha = float(self.alpha)
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    def vector(self) -> np.ndarray:
        return np.append(self.beta, self.alpha)

    def __repr__(self):
        return f"Theta(beta={np.array2string(self.beta, precision=6)}, alpha={self.alpha:.6g})"


@dataclass(frozen=True)
class HatStats:
    leverages: np.ndarray
    trace_zd2: float


def _check(theta: Theta, data: Dataset) -> None:
    if theta.beta.shape[0] != data.p:
        raise ValueError(f"beta has length {theta.beta.shape[0]}, design has p={data.p}")


def _logcosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - _LOG2


def xi_vectors(theta: Theta, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    _check(theta, data)
    half = 0.5 * (data.y - data.X @ theta.beta)
    scale = 2.0 / theta.alpha
    return scale * np.cosh(half), scale * np.sinh(half)


def loglik(theta: Theta, data: Dataset) -> float:
    _check(theta, data)
    resid = data.y - data.X @ theta.beta
    return float(_loglik_batch(resid[None, :], np.array([theta.alpha]))[0])


def score(theta: Theta, data: Dataset) -> np.ndarray:
    """Gradient of the log-likelihood in ``(beta, alpha)`` (length p + 1)."""
    _check(theta, data)
    resid = data.y - data.X @ theta.beta
    a = theta.alpha
    s = _s_vector(resid, a)
    xi2sq = (4.0 / (a * a)) * np.sinh(0.5 * resid) ** 2
    u_beta = 0.5 * (data.X.T @ s)
    u_alpha = (-data.n + xi2sq.sum()) / a
    return np.append(u_beta, u_alpha)


def fisher_info(theta: Theta, data: Dataset) -> np.ndarray:
    """Expected information ``diag(psi1(alpha) X'X / 4, 2n / alpha**2)``."""
    _check(theta, data)
    p = data.p
    k = np.zeros((p + 1, p + 1))
    k[:p, :p] = psi_set(theta.alpha).psi1 * (data.X.T @ data.X) / 4.0
    k[p, p] = 2.0 * data.n / theta.alpha**2
    return k


def hat_stats(X) -> HatStats:
    """Leverages ``z_ii`` of the projector onto span(X), and ``sum z_ii**2``."""
    X = as_design(X)
    q = orthonormal_basis(X)
    lev = np.einsum("ij,ij->i", q, q)
    return HatStats(leverages=lev, trace_zd2=float(np.dot(lev, lev)))


# -- batched internals --------------------------------------------------------


def _s_vector(resid, alpha):
    # xi1*xi2 - xi2/xi1 = (2/alpha^2) sinh(r) - tanh(r/2)
    return (2.0 / (alpha * alpha)) * np.sinh(resid) - np.tanh(0.5 * resid)


def _loglik_batch(resid: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Log-likelihood per row of an (m, n) residual matrix."""
    n = resid.shape[1]
    a = alpha[:, None]
    half = 0.5 * resid
    xi2 = (2.0 / a) * np.sinh(half)
    return (
        -0.5 * n * _LOG_8PI
        + n * np.log(2.0 / alpha)
        + _logcosh(half).sum(axis=1)
        - 0.5 * (xi2 * xi2).sum(axis=1)
    )


def _loglik_grad_batch(resid: np.ndarray, alpha: np.ndarray, X: np.ndarray | None):
    """Log-likelihood, beta-gradient ``X' s / 2`` and log-alpha gradient.

    ``X`` may be ``None`` (no free regression coefficients).  Rows with a
    non-finite log-likelihood come back as ``-inf``.
    """
    n = resid.shape[1]
    a = alpha[:, None]
    half = 0.5 * resid
    sh = np.sinh(half)
    xi2sq = (4.0 / (a * a)) * sh * sh
    sum_xi2sq = xi2sq.sum(axis=1)
    ll = (
        -0.5 * n * _LOG_8PI
        + n * np.log(2.0 / alpha)
        + _logcosh(half).sum(axis=1)
        - 0.5 * sum_xi2sq
    )
    g_logalpha = sum_xi2sq - n
    if X is None or X.shape[1] == 0:
        g_beta = np.zeros((resid.shape[0], 0))
    else:
        s = (2.0 / (a * a)) * np.sinh(resid) - np.tanh(half)
        g_beta = 0.5 * (s @ X)
    bad = ~np.isfinite(ll) | ~np.all(np.isfinite(g_beta), axis=1) | ~np.isfinite(g_logalpha)
    if np.any(bad):
        ll = np.where(bad, -np.inf, ll)
    return ll, g_beta, g_logalpha


def alpha_closed_form(resid: np.ndarray) -> np.ndarray:
    """Profile MLE of alpha given residuals: ``sqrt((4/n) sum sinh(r/2)**2)`` per row."""
    resid = np.atleast_2d(resid)
    return np.sqrt(4.0 * np.mean(np.sinh(0.5 * resid) ** 2, axis=1))
