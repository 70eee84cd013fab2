"""Input validation helpers shared by the functional API and the estimator."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .exceptions import RankDeficientError

RANK_RTOL = 1e-10


def as_response(y, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def as_design(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def numerical_rank(X: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank from a column-pivoted QR: count of |R_jj| above ``rtol * |R_11|``."""
    if X.shape[1] == 0:
        return 0
    r = linalg.qr(X, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.sum(d > rtol * d[0]))


def check_full_rank(X: np.ndarray, name: str = "X") -> None:
    n, p = X.shape
    rank = numerical_rank(X)
    if rank < p:
        raise RankDeficientError(
            f"{name} ({n}x{p}) has numerical rank {rank} < {p} columns"
        )


def orthonormal_basis(X: np.ndarray) -> np.ndarray:
    """Thin Q factor spanning the columns of a full-rank ``X``."""
    check_full_rank(X)
    q, _ = np.linalg.qr(X, mode="reduced")
    return q
