"""Bartlett correction for likelihood ratio tests in the BS regression.

The expected likelihood ratio statistic under H0 is ``q + B + O(n^-2)``, and
dividing by ``c = 1 + B/q`` removes the O(1/n) bias.  For the full parameter
``(beta, alpha)`` the O(1/n) term of ``2 E[l(theta_hat) - l(theta)]`` is

    eps(alpha, X) = (1/3 + d1 p + d2 p**2) / n + d3 * sum_i z_ii**2

with ``z_ii`` the leverages of ``X`` and ``d1..d3`` from
:func:`bsinfer.specfun.delta_set`.  ``B`` is then a difference of two such
terms, one for the full model and one for the model under H0.

:func:`lawley_epsilon_oracle` recomputes ``eps`` by summing the general
cumulant expansion term by term.  It exists to check the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_design, check_full_rank
from .exceptions import BartlettFactorError
from .hypotheses import AlphaFixed, BetaFull, BetaSubset
from .model import hat_stats
from .specfun import _delta_arrays, psi_set

__all__ = [
    "AlphaFixed",
    "BetaSubset",
    "BetaFull",
    "BartlettFactor",
    "epsilon_alpha",
    "epsilon_beta",
    "epsilon_general",
    "bartlett_B",
    "bartlett_B_batch",
    "lawley_epsilon_oracle",
]


@dataclass(frozen=True)
class BartlettFactor:
    B: float
    q: int

    @property
    def c(self) -> float:
        return 1.0 + self.B / self.q

    def check(self, alpha: float | None = None, X=None) -> "BartlettFactor":
        if not self.c > 0:
            where = "" if alpha is None else f" at alpha={alpha:.6g}"
            if X is not None:
                where += f", design {np.shape(X)[0]}x{np.shape(X)[1]}"
            raise BartlettFactorError(
                f"Bartlett factor c = 1 + B/q = {self.c:.6g} is not positive{where}"
            )
        return self


def epsilon_alpha(alpha, p: int, n: int):
    """The part of the correction due to alpha being estimated."""
    _, d1, d2, _ = _delta_arrays(alpha)
    return (1.0 / 3.0 + d1 * p + d2 * p * p) / n


def epsilon_beta(alpha, X):
    """The part that remains when alpha is known: ``d3 * sum z_ii**2``."""
    return _delta_arrays(alpha)[3] * hat_stats(X).trace_zd2


def epsilon_general(alpha: float, X) -> float:
    X = as_design(X)
    psi_set(alpha)  # domain check
    n, p = X.shape
    return float(epsilon_alpha(alpha, p, n) + epsilon_beta(alpha, X))


class _Terms:
    """Design-only pieces of B for a hypothesis: B(alpha) = (d1*a1 + d2*a2)/n + d3*t."""

    def __init__(self, h, X: np.ndarray):
        n, p = X.shape
        h.validate(p)
        self.n = n
        if isinstance(h, AlphaFixed):
            self.q = 1
            self.a0, self.a1, self.a2, self.t = 1.0 / 3.0, p, p * p, 0.0
        elif isinstance(h, BetaFull):
            self.q = p
            self.a0, self.a1, self.a2 = 0.0, p, p * p
            self.t = hat_stats(X).trace_zd2
        elif isinstance(h, BetaSubset):
            q = h.q(p)
            if q == 0:
                raise ValueError("BetaSubset with no restricted coefficients has no Bartlett factor")
            self.q = q
            self.a0, self.a1, self.a2 = 0.0, q, q * (2 * p - q)
            free = h.free_indices(p)
            t1 = 0.0
            if free.size:
                X1 = X[:, free]
                check_full_rank(X1, name="X with restricted columns removed")
                t1 = hat_stats(X1).trace_zd2
            self.t = hat_stats(X).trace_zd2 - t1
        else:
            raise TypeError(f"unsupported hypothesis {h!r}")

    def B(self, alpha):
        _, d1, d2, d3 = _delta_arrays(alpha)
        return (self.a0 + d1 * self.a1 + d2 * self.a2) / self.n + d3 * self.t


def bartlett_B(h, alpha: float, X) -> BartlettFactor:
    """Bartlett term ``B`` and restriction count ``q`` for hypothesis ``h``.

    - ``AlphaFixed``: ``B = (1/3 + d1 p + d2 p^2)/n``, q = 1
    - ``BetaSubset``: ``B = (d1 q + d2 q(2p - q))/n + d3 (tr Zd2 - tr Z1d2)``
    - ``BetaFull``: ``B = (d1 p + d2 p^2)/n + d3 tr Zd2``, q = p

    ``alpha`` is normally the restricted estimate.  The result is not checked
    for ``c > 0``; callers that divide by ``c`` call :meth:`BartlettFactor.check`.
    """
    X = as_design(X)
    check_full_rank(X)
    psi_set(alpha)
    terms = _Terms(h, X)
    return BartlettFactor(B=float(terms.B(float(alpha))), q=terms.q)


def bartlett_B_batch(h, alphas, X) -> tuple[np.ndarray, int]:
    """``B`` at many alpha values for one design (the leverage work is done once)."""
    terms = _Terms(h, as_design(X))
    return np.asarray(terms.B(np.asarray(alphas, dtype=float))), terms.q


# -- brute-force oracle --------------------------------------------------------


def _cumulants(alpha: float, X: np.ndarray):
    """Second-, third- and fourth-order joint cumulants of log-likelihood derivatives.

    Index p (the last) is alpha; 0..p-1 are the regression coefficients.
    """
    n, p = X.shape
    k = p + 1
    a = alpha
    ps = psi_set(a)
    G = X.T @ X

    k2 = np.zeros((k, k))
    k2[:p, :p] = -ps.psi1 / 4.0 * G
    k2[p, p] = -2.0 * n / a**2

    k3 = np.zeros((k, k, k))
    rsa = (2.0 + a * a) / a**3 * G
    k3[:p, :p, p] = rsa
    k3[:p, p, :p] = rsa
    k3[p, :p, :p] = rsa
    k3[p, p, p] = 10.0 * n / a**3

    k4 = np.zeros((k, k, k, k))
    k4[:p, :p, :p, :p] = ps.psi2 * np.einsum("ir,is,it,iu->rstu", X, X, X, X)
    rsaa = -3.0 * (2.0 + a * a) / a**4 * G
    for sl in (
        (slice(None, p), slice(None, p), p, p),
        (slice(None, p), p, slice(None, p), p),
        (slice(None, p), p, p, slice(None, p)),
        (p, slice(None, p), slice(None, p), p),
        (p, slice(None, p), p, slice(None, p)),
        (p, p, slice(None, p), slice(None, p)),
    ):
        k4[sl] = rsaa
    k4[p, p, p, p] = -54.0 * n / a**4
    return k2, k3, k4


def _richardson(f, a: float, h: float, order: int):
    """Central-difference derivative of order 1 or 2 with one Richardson step."""
    if order == 1:
        D = lambda s: (f(a + s) - f(a - s)) / (2.0 * s)  # noqa: E731
    else:
        fa = f(a)
        D = lambda s: (f(a + s) - 2.0 * fa + f(a - s)) / (s * s)  # noqa: E731
    return (4.0 * D(0.5 * h) - D(h)) / 3.0


def lawley_epsilon_oracle(alpha: float, X, indices=None) -> float:
    """Sum ``lambda_rstu - lambda_rstuvw`` over all parameter indices.

    No cumulant depends on beta, so only alpha-derivatives of cumulants are
    non-zero; they are taken numerically.  ``indices`` restricts the sum to a
    subset of parameter positions (0..p-1 regression coefficients, p for
    alpha); the default is all of them.  Cost grows as (p+1)**6, so p + 1 <= 5.
    """
    X = as_design(X)
    check_full_rank(X)
    n, p = X.shape
    k = p + 1
    if k > 5:
        raise ValueError(f"oracle limited to p + 1 <= 5, got p = {p}")
    a = float(alpha)
    k2, k3, k4 = _cumulants(a, X)
    h = 1e-4 * max(1.0, a)

    # kappa_rs^(t): only t = alpha contributes
    d2 = np.zeros((k, k, k))
    d2[:, :, p] = _richardson(lambda b: _cumulants(b, X)[0], a, h, 1)
    # kappa_rs^(tu): only t = u = alpha
    d22 = np.zeros((k, k, k, k))
    d22[:, :, p, p] = _richardson(lambda b: _cumulants(b, X)[0], a, h, 2)
    # kappa_rst^(u)
    d3 = np.zeros((k, k, k, k))
    d3[:, :, :, p] = _richardson(lambda b: _cumulants(b, X)[1], a, h, 1)

    # kappa^{rs}: inverse of the matrix of kappa_rs (minus the inverse information)
    kinv = np.linalg.inv(k2)
    if indices is not None:
        keep = np.zeros(k, dtype=bool)
        keep[list(indices)] = True
        kinv = np.where(np.outer(keep, keep), kinv, 0.0)

    # lambda_rstu = k^rs k^tu {k_rstu/4 - k_rst^(u) + k_rt^(su)}
    inner4 = k4 / 4.0 - d3 + np.transpose(d22, (0, 2, 1, 3))
    lam4 = np.einsum("rs,tu,rstu->", kinv, kinv, inner4)

    # lambda_rstuvw = k^rs k^tu k^vw {k_rtv (k_suw/6 - k_sw^(u))
    #                  + k_rtu (k_svw/4 - k_sw^(v)) + k_rt^(v) k_sw^(u) + k_rt^(u) k_sw^(v)}
    K = (kinv, kinv, kinv)
    lam6 = (
        np.einsum("rs,tu,vw,rtv,suw->", *K, k3, k3) / 6.0
        - np.einsum("rs,tu,vw,rtv,swu->", *K, k3, d2)
        + np.einsum("rs,tu,vw,rtu,svw->", *K, k3, k3) / 4.0
        - np.einsum("rs,tu,vw,rtu,swv->", *K, k3, d2)
        + np.einsum("rs,tu,vw,rtv,swu->", *K, d2, d2)
        + np.einsum("rs,tu,vw,rtu,swv->", *K, d2, d2)
    )
    return float(lam4 - lam6)
