"""Null hypotheses supported by the likelihood ratio tests.

Coefficient indices are 0-based positions in ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["AlphaFixed", "BetaSubset", "BetaFull", "Hypothesis"]


@dataclass(frozen=True)
class AlphaFixed:
    """H0: alpha = alpha0, with every regression coefficient a nuisance parameter."""

    alpha0: float

    def __post_init__(self):
        a = float(self.alpha0)
        if not (a > 0 and math.isfinite(a)):
            raise ValueError(f"alpha0 must be positive, got {self.alpha0!r}")
        object.__setattr__(self, "alpha0", a)

    def q(self, p: int) -> int:
        return 1

    def validate(self, p: int) -> None:
        pass


@dataclass(frozen=True)
class BetaSubset:
    """H0: beta[indices] = values; the other coefficients and alpha are nuisance."""

    indices: tuple[int, ...]
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in np.atleast_1d(self.indices))
        vals = (
            tuple(0.0 for _ in idx)
            if self.values is None
            else tuple(float(v) for v in np.atleast_1d(self.values))
        )
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate restricted indices: {idx}")
        if len(vals) != len(idx):
            raise ValueError(f"{len(idx)} indices but {len(vals)} values")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("restricted values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    def q(self, p: int) -> int:
        return len(self.indices)

    def validate(self, p: int) -> None:
        bad = [i for i in self.indices if not 0 <= i < p]
        if bad:
            raise ValueError(f"restricted indices {bad} outside 0..{p - 1}")

    def free_indices(self, p: int) -> np.ndarray:
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class BetaFull:
    """H0: beta = values (all p coefficients); alpha is the only nuisance parameter."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not vals:
            raise ValueError("BetaFull needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("restricted values must be finite")
        object.__setattr__(self, "values", vals)

    def q(self, p: int) -> int:
        return len(self.values)

    def validate(self, p: int) -> None:
        if len(self.values) != p:
            raise ValueError(f"BetaFull has {len(self.values)} values for p={p}")


Hypothesis = AlphaFixed | BetaSubset | BetaFull
