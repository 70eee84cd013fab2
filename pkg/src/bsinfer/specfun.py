"""Special functions and the shape-dependent coefficient functions.

Everything here is a pure function of its arguments.  The error-function
family, incomplete gamma and incomplete beta evaluations are delegated to
``scipy.special``; the psi/delta coefficient functions that enter the Fisher
information and the Bartlett correction are written out here.

The coefficient functions all go through ``erfcx(sqrt(2)/alpha)``.  The
textbook form ``(1 - erf(sqrt(2)/alpha)) * exp(2/alpha**2)`` underflows to
``0 * inf`` for alpha below roughly 0.17.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "PsiSet",
    "DeltaSet",
    "erf_family",
    "psi_set",
    "delta_set",
    "normal_cdf",
    "normal_quantile",
    "chisq_cdf",
    "chisq_sf",
    "chisq_quantile",
    "student_t_cdf",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


@dataclass(frozen=True)
class PsiSet:
    psi0: float
    psi1: float
    psi2: float
    psi3: float


@dataclass(frozen=True)
class DeltaSet:
    delta0: float
    delta1: float
    delta2: float
    delta3: float


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError(f"alpha must be positive and finite, got {alpha!r}")
    return a


def erf_family(x):
    """Return ``(erf(x), erfc(x), erfcx(x))``.

    ``erfcx(x) = exp(x**2) * erfc(x)`` is evaluated directly, so it stays
    finite for large positive ``x`` where the product form overflows.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("erf_family requires finite input")
    out = special.erf(x), special.erfc(x), special.erfcx(x)
    if x.ndim == 0:
        return tuple(float(v) for v in out)
    return out


def _psi_arrays(alpha):
    # Vectorised core shared by psi_set, delta_set and the batched Monte Carlo code.
    a = np.asarray(alpha, dtype=float)
    a2 = a * a
    psi0 = special.erfcx(_SQRT2 / a)
    psi1 = 2.0 + 4.0 / a2 - (_SQRT2PI / a) * psi0
    psi2 = -0.25 * (2.0 + 7.0 / a2 - _SQRT_HALF_PI * (0.5 / a + 6.0 / (a2 * a)) * psi0)
    psi3 = 3.0 / (a2 * a) - (_SQRT2PI / (4.0 * a2)) * (1.0 + 4.0 / a2) * psi0
    return psi0, psi1, psi2, psi3


def _delta_arrays(alpha):
    a = np.asarray(alpha, dtype=float)
    a2 = a * a
    _, psi1, psi2, psi3 = _psi_arrays(a)
    delta0 = (2.0 + a2) / (psi1 * a2)
    delta1 = 4.0 * delta0 * (2.0 / (2.0 + a2) + delta0 - 2.0 * a * psi3 / psi1)
    delta2 = 2.0 * delta0 * delta0
    delta3 = 4.0 * psi2 / (psi1 * psi1)
    return delta0, delta1, delta2, delta3


def psi_set(alpha: float) -> PsiSet:
    """Coefficient functions psi0..psi3 at shape ``alpha``.

    psi1 scales the Fisher information for the regression coefficients,
    ``K(beta) = psi1 * X'X / 4``; psi2 scales their fourth-order cumulants;
    psi3 enters delta1.
    """
    _check_alpha(alpha)
    return PsiSet(*(float(v) for v in _psi_arrays(float(alpha))))


def delta_set(alpha: float) -> DeltaSet:
    """Polynomial coefficients of the O(1/n) Bartlett term at shape ``alpha``."""
    _check_alpha(alpha)
    return DeltaSet(*(float(v) for v in _delta_arrays(float(alpha))))


def normal_cdf(x):
    x = np.asarray(x, dtype=float)
    out = special.ndtr(x)
    return float(out) if out.ndim == 0 else out


def normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0.0) | ~(p < 1.0)):
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    out = special.ndtri(p)
    return float(out) if out.ndim == 0 else out


def _check_df(df):
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df!r}")
    return int(df)


def chisq_cdf(x, df: int):
    """Chi-square distribution function via the regularized lower incomplete gamma."""
    df = _check_df(df)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("chisq_cdf requires x >= 0")
    out = special.gammainc(0.5 * df, 0.5 * x)
    return float(out) if out.ndim == 0 else out


def chisq_sf(x, df: int):
    """Upper tail ``1 - chisq_cdf(x, df)``, computed without cancellation."""
    df = _check_df(df)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("chisq_sf requires x >= 0")
    out = special.gammaincc(0.5 * df, 0.5 * x)
    return float(out) if out.ndim == 0 else out


def chisq_quantile(p, df: int):
    df = _check_df(df)
    p = np.asarray(p, dtype=float)
    if np.any(~(p >= 0.0) | ~(p < 1.0)):
        raise ValueError(f"chisq_quantile requires 0 <= p < 1, got {p!r}")
    out = 2.0 * special.gammaincinv(0.5 * df, p)
    return float(out) if out.ndim == 0 else out


def student_t_cdf(x, df: int):
    """Student t distribution function (regularized incomplete beta)."""
    df = _check_df(df)
    x = np.asarray(x, dtype=float)
    out = special.stdtr(df, x)
    return float(out) if out.ndim == 0 else out
