"""Likelihood ratio tests: plain, Bartlett-corrected and parametric bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correction import BartlettFactor, bartlett_B
from .exceptions import ConvergenceError, DegenerateDataError
from .mle import FitOptions, fit_full_batch, fit_restricted_batch
from .model import Dataset, Theta
from .rng import fresh_seed, stream
from .specfun import chisq_sf

__all__ = [
    "TestReport",
    "BootstrapReport",
    "lr_test",
    "bootstrap_test",
    "lr_statistics",
    "bootstrap_replicates",
    "critical_value",
]

LR_CLAMP = 1e-8
MAX_REDRAW_FRACTION = 0.10


@dataclass
class TestReport:
    lr: float
    lr_b: float
    lr_b_star: float
    lr_b_2star: float
    df: int
    p_lr: float
    p_lr_b: float
    p_lr_b_star: float
    p_lr_b_2star: float
    bartlett: BartlettFactor
    theta_hat: Theta
    theta_tilde: Theta
    loglik_hat: float = math.nan
    loglik_tilde: float = math.nan

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "lr_b": self.lr_b,
            "lr_b_star": self.lr_b_star,
            "lr_b_2star": self.lr_b_2star,
            "df": self.df,
            "p_values": {
                "lr": self.p_lr,
                "lr_b": self.p_lr_b,
                "lr_b_star": self.p_lr_b_star,
                "lr_b_2star": self.p_lr_b_2star,
            },
            "bartlett": {"B": self.bartlett.B, "c": self.bartlett.c, "q": self.bartlett.q},
            "theta_hat": {"beta": self.theta_hat.beta.tolist(), "alpha": self.theta_hat.alpha},
            "theta_tilde": {"beta": self.theta_tilde.beta.tolist(), "alpha": self.theta_tilde.alpha},
            "loglik": {"full": self.loglik_hat, "restricted": self.loglik_tilde},
        }


@dataclass
class BootstrapReport:
    lr_observed: float
    replicates: np.ndarray
    critical_values: dict[float, float]
    p_value: float
    B: int
    seed: int
    redraws: int = 0

    def reject(self, level: float) -> bool:
        return self.lr_observed > critical_value(self.replicates, level)

    def to_dict(self) -> dict:
        return {
            "lr_observed": self.lr_observed,
            "p_value": self.p_value,
            "critical_values": {f"{k:g}": v for k, v in self.critical_values.items()},
            "B": self.B,
            "seed": self.seed,
            "redraws": self.redraws,
        }


def _chisq_pvalue(stat, q: int):
    stat = np.asarray(stat, dtype=float)
    return np.where(stat > 0, chisq_sf(np.maximum(stat, 0.0), q), 1.0)


def critical_value(replicates, level: float) -> float:
    """Smallest order statistic with ``#{LR* <= value} / B >= 1 - level``."""
    r = np.sort(np.asarray(replicates, dtype=float))
    k = math.ceil(round((1.0 - level) * r.size, 9))
    return float(r[max(k, 1) - 1])


def lr_statistics(lr, B, q: int) -> dict[str, np.ndarray]:
    """The four statistics ``LR, LR/c, LR exp(-B/q), LR (1 - B/q)``."""
    lr = np.asarray(lr, dtype=float)
    ratio = np.asarray(B, dtype=float) / q
    return {
        "LR": lr,
        "LR_b": lr / (1.0 + ratio),
        "LR_b_star": lr * np.exp(-ratio),
        "LR_b_2star": lr * (1.0 - ratio),
    }


def _lr_batch(Y, X, h, opts: FitOptions):
    """Full and restricted fits plus LR for each row of ``Y``.

    When the full fit from least squares lands below the restricted maximum
    (the likelihood can be multimodal for large alpha), the full fit is
    restarted from the restricted estimate, which is feasible for the larger
    model.  Returns ``(full, restricted, lr, ok)``.
    """
    full = fit_full_batch(Y, X, opts)
    restr = fit_restricted_batch(Y, X, h, opts)
    lr = 2.0 * (full.loglik - restr.loglik)
    low = np.flatnonzero(~(lr >= -LR_CLAMP) & np.isfinite(restr.loglik))
    if low.size:
        again = fit_full_batch(Y[low], X, opts, start=(restr.beta[low], restr.alpha[low]))
        better = again.loglik > full.loglik[low]
        sel = low[better]
        for name in ("beta", "alpha", "loglik", "converged", "iterations", "grad_norm"):
            getattr(full, name)[sel] = getattr(again, name)[better]
        lr = 2.0 * (full.loglik - restr.loglik)
    ok = full.converged & restr.converged & np.isfinite(lr) & (lr >= -LR_CLAMP)
    lr = np.where((lr < 0) & (lr >= -LR_CLAMP), 0.0, lr)
    return full, restr, lr, ok


def lr_test(
    data: Dataset, h, opts: FitOptions | None = None, *, bartlett_at: str = "restricted"
) -> TestReport:
    """Likelihood ratio test of ``h`` with Bartlett-corrected variants.

    ``B`` is evaluated at the restricted estimate of alpha by default;
    ``bartlett_at="full"`` uses the unrestricted estimate instead.
    """
    opts = opts or FitOptions()
    h.validate(data.p)
    full, restr, lr, ok = _lr_batch(data.y[None, :], data.X, h, opts)
    for fit, what in ((full, "unrestricted fit"), (restr, "restricted fit")):
        if fit.degenerate is not None and fit.degenerate[0]:
            raise DegenerateDataError(f"{what}: response lies in the column space of the design")
        if not fit.converged[0]:
            raise ConvergenceError(
                f"{what} did not converge after {fit.iterations[0]} iterations "
                f"(max |gradient| = {fit.grad_norm[0]:.3g})"
            )
    if not ok[0]:
        raise ConvergenceError(f"likelihood ratio statistic is negative ({lr[0]:.3g})")
    theta_hat, ll_hat = full.row(0)
    theta_tilde, ll_tilde = restr.row(0)
    if bartlett_at == "restricted":
        a = theta_tilde.alpha
    elif bartlett_at == "full":
        a = theta_hat.alpha
    else:
        raise ValueError(f"bartlett_at must be 'restricted' or 'full', got {bartlett_at!r}")
    bf = bartlett_B(h, a, data.X).check(a, data.X)
    stats = lr_statistics(lr[0], bf.B, bf.q)
    pv = {k: float(_chisq_pvalue(v, bf.q)) for k, v in stats.items()}
    return TestReport(
        lr=float(lr[0]),
        lr_b=float(stats["LR_b"]),
        lr_b_star=float(stats["LR_b_star"]),
        lr_b_2star=float(stats["LR_b_2star"]),
        df=bf.q,
        p_lr=pv["LR"],
        p_lr_b=pv["LR_b"],
        p_lr_b_star=pv["LR_b_star"],
        p_lr_b_2star=pv["LR_b_2star"],
        bartlett=bf,
        theta_hat=theta_hat,
        theta_tilde=theta_tilde,
        loglik_hat=ll_hat,
        loglik_tilde=ll_tilde,
    )


def _simulate_null(X, beta, alpha, seed, keys) -> np.ndarray:
    mu = X @ beta
    rows = [stream(seed, *k).standard_normal(X.shape[0]) for k in keys]
    Z = np.asarray(rows).reshape(len(keys), X.shape[0])
    return mu + 2.0 * np.arcsinh(0.5 * alpha * Z)


def bootstrap_replicates(
    X: np.ndarray,
    theta_tilde: Theta,
    h,
    B: int,
    seed,
    opts: FitOptions | None = None,
) -> tuple[np.ndarray, int]:
    """LR statistics on ``B`` pseudo-samples drawn from the restricted fit.

    Replicate ``b`` uses the stream ``(seed, b, attempt)``; a replicate whose
    fits fail is redrawn with the next attempt number.  Raises
    :class:`ConvergenceError` if redraws exceed 10% of ``B``.
    """
    opts = opts or FitOptions()
    out = np.full(B, np.nan)
    attempt = np.zeros(B, dtype=int)
    todo = np.arange(B)
    redraws = 0
    limit = max(1, int(MAX_REDRAW_FRACTION * B))
    while todo.size:
        Y = _simulate_null(
            X, theta_tilde.beta, theta_tilde.alpha, seed,
            [(int(b), int(attempt[b])) for b in todo],
        )
        _, _, lr, ok = _lr_batch(Y, X, h, opts)
        out[todo[ok]] = lr[ok]
        failed = todo[~ok]
        redraws += failed.size
        if redraws > limit:
            raise ConvergenceError(
                f"bootstrap: {redraws} replicate fits failed (limit {limit} of B={B})"
            )
        attempt[failed] += 1
        todo = failed
    return out, redraws


def bootstrap_test(
    data: Dataset,
    h,
    B: int = 600,
    seed: int | None = None,
    opts: FitOptions | None = None,
    levels=(0.10, 0.05, 0.01),
) -> BootstrapReport:
    """Parametric bootstrap likelihood ratio test.

    Pseudo-samples are generated under H0 with the parameters set to their
    restricted estimates.  H0 is rejected at level ``g`` when the observed
    statistic exceeds the ``1 - g`` bootstrap quantile; the p-value is
    ``(1 + #{LR* >= LR}) / (B + 1)``.  Given the seed the result is
    deterministic.
    """
    if int(B) != B or B < 19:
        raise ValueError(f"B must be an integer >= 19, got {B!r}")
    B = int(B)
    opts = opts or FitOptions()
    h.validate(data.p)
    if seed is None:
        seed = fresh_seed()
    seed = int(seed)
    report = lr_test(data, h, opts)
    reps, redraws = bootstrap_replicates(data.X, report.theta_tilde, h, B, seed, opts)
    crit = {float(g): critical_value(reps, g) for g in levels}
    p_value = (1.0 + np.count_nonzero(reps >= report.lr)) / (B + 1.0)
    return BootstrapReport(
        lr_observed=report.lr,
        replicates=reps,
        critical_values=crit,
        p_value=float(p_value),
        B=B,
        seed=seed,
        redraws=redraws,
    )
