"""Monte Carlo size and power experiments for the likelihood ratio tests.

By default the design matrix is drawn once per experiment (stream
``(seed, 0)``) and held fixed across replications; with ``fixed_design=False``
replication ``r`` draws its own design from ``(seed, 0, r, attempt)``, which
averages over designs.  Replication ``r`` draws its errors from stream
``(seed, 1, r, attempt)`` and, when a bootstrap is requested, its bootstrap
samples from ``(seed, 2, r, attempt, b, ...)``.  Replications are processed
in fixed-size chunks; every chunk is fitted as one batch.  Because streams and
chunk boundaries depend only on the configuration, results are bit-identical
for any number of workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .correction import bartlett_B_batch
from .exceptions import BartlettFactorError, ConvergenceError
from .hypotheses import AlphaFixed, BetaFull, BetaSubset
from .mle import FitOptions
from .model import Theta
from .rng import child_sequence, stream
from .specfun import chisq_quantile, student_t_cdf
from .testing import _lr_batch, bootstrap_replicates, critical_value, lr_statistics

__all__ = [
    "UniformIID",
    "CollinearPair",
    "SimConfig",
    "SimResult",
    "ExperimentAborted",
    "run_null_rejection",
    "run_power",
    "quantile_discrepancy",
    "make_collinear_design",
    "normal_true_level",
    "table_experiments",
    "figure_config",
    "normal_level_table",
    "PRESET_TABLES",
]

DEFAULT_LEVELS = (0.10, 0.05, 0.01)
NULL_STATISTICS = ("LR", "LR_b", "LR_b_star")
POWER_STATISTICS = ("LR_b", "LR_b_star")
MAX_REDRAW_FRACTION = 0.01
_MAX_ATTEMPTS = 25


class ExperimentAborted(ConvergenceError):
    """Too many replications failed to fit."""


@dataclass(frozen=True)
class UniformIID:
    """Intercept plus p - 1 independent U(0, 1) covariates."""


@dataclass(frozen=True)
class CollinearPair:
    """Intercept, one U(0, 1) covariate and a correlated standard normal pair (p = 4)."""

    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho!r}")


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    alpha: float
    hypothesis: object
    levels: tuple[float, ...] = DEFAULT_LEVELS
    replications: int = 10_000
    seed: int = 0
    design: object = field(default_factory=UniformIID)
    delta: float = 0.0
    bootstrap_B: int | None = None
    statistics: tuple[str, ...] = NULL_STATISTICS
    chunk_size: int = 500
    fixed_design: bool = True
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.replications < 100:
            raise ValueError(f"replications must be >= 100, got {self.replications}")
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if self.n <= self.p or self.p < 1:
            raise ValueError(f"need n > p >= 1, got n={self.n}, p={self.p}")
        if not all(0.0 < g < 1.0 for g in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        if self.bootstrap_B is not None and self.bootstrap_B < 19:
            raise ValueError("bootstrap_B must be >= 19")
        if isinstance(self.design, CollinearPair) and self.p != 4:
            raise ValueError("the collinear design has p = 4 columns")
        self.hypothesis.validate(self.p)
        if isinstance(self.hypothesis, AlphaFixed) and self.delta == 0.0:
            if not math.isclose(self.hypothesis.alpha0, self.alpha):
                raise ValueError("under H0 the hypothesised alpha0 must equal the true alpha")
        object.__setattr__(self, "levels", tuple(float(g) for g in self.levels))
        object.__setattr__(self, "statistics", tuple(self.statistics))

    def true_beta(self) -> np.ndarray:
        """Coefficients used to generate data: 1 for nuisance terms, H0 value + delta otherwise."""
        h = self.hypothesis
        beta = np.ones(self.p)
        if isinstance(h, BetaSubset):
            beta[list(h.indices)] = np.asarray(h.values) + self.delta
        elif isinstance(h, BetaFull):
            beta[:] = np.asarray(h.values) + self.delta
        return beta

    def true_alpha(self) -> float:
        if isinstance(self.hypothesis, AlphaFixed):
            return self.hypothesis.alpha0 + self.delta
        return self.alpha

    def all_statistics(self) -> tuple[str, ...]:
        stats = self.statistics
        if self.bootstrap_B and "LR_boot" not in stats:
            stats = stats + ("LR_boot",)
        return stats


@dataclass
class SimResult:
    rejection_rates: dict[tuple[str, float], float]
    mc_standard_errors: dict[tuple[str, float], float]
    replications_used: int
    elapsed: float
    redraws: int = 0
    config: SimConfig | None = None

    def rate(self, statistic: str, level: float) -> float:
        return self.rejection_rates[(statistic, float(level))]

    def se(self, statistic: str, level: float) -> float:
        return self.mc_standard_errors[(statistic, float(level))]

    def rows(self) -> list[dict]:
        return [
            {"statistic": s, "level": g, "rate": r, "mc_se": self.mc_standard_errors[(s, g)]}
            for (s, g), r in self.rejection_rates.items()
        ]


def mc_standard_error(rate_pct: float, replications: int) -> float:
    r = rate_pct / 100.0
    return 100.0 * math.sqrt(r * (1.0 - r) / replications)


# -- designs -------------------------------------------------------------------


def make_collinear_design(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """``[1, U(0,1), N2(0, [[1, rho], [rho, 1]])]`` rows."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho!r}")
    if n < 1:
        raise ValueError("n must be positive")
    u = rng.uniform(size=n)
    L = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    pair = rng.standard_normal((n, 2)) @ L.T
    return np.column_stack([np.ones(n), u, pair])


def make_design(cfg: SimConfig, *key: int) -> np.ndarray:
    """The experiment's design; ``key`` selects a per-replication draw."""
    rng = stream(cfg.seed, 0, *key)
    if isinstance(cfg.design, CollinearPair):
        return make_collinear_design(cfg.n, cfg.design.rho, rng)
    if isinstance(cfg.design, UniformIID):
        return np.column_stack([np.ones(cfg.n), rng.uniform(size=(cfg.n, cfg.p - 1))])
    raise TypeError(f"unknown design {cfg.design!r}")


# -- simulation core -------------------------------------------------------------


def _errors(cfg: SimConfig, keys) -> np.ndarray:
    Z = [stream(cfg.seed, 1, r, a).standard_normal(cfg.n) for r, a in keys]
    return 2.0 * np.arcsinh(0.5 * cfg.true_alpha() * np.asarray(Z).reshape(len(keys), cfg.n))


def _fit_group(cfg: SimConfig, X: np.ndarray, keys):
    Y = X @ cfg.true_beta() + _errors(cfg, keys)
    _, restr, lr, ok = _lr_batch(Y, X, cfg.hypothesis, cfg.fit_options)
    return lr, restr.beta, restr.alpha, ok


def _simulate_chunk(cfg: SimConfig, X: np.ndarray | None, reps: np.ndarray):
    """Fit every replication in ``reps``; returns (lr, B, boot_reject, redraws).

    ``X`` is the shared design, or None to draw one per replication.
    """
    m = reps.size
    lr = np.full(m, np.nan)
    alpha_tilde = np.full(m, np.nan)
    beta_tilde = np.full((m, cfg.p), np.nan)
    designs = [None] * m
    attempt = np.zeros(m, dtype=int)
    todo = np.arange(m)
    redraws = 0
    while todo.size:
        if np.any(attempt[todo] >= _MAX_ATTEMPTS):
            raise ExperimentAborted(
                f"replication {int(reps[todo[attempt[todo] >= _MAX_ATTEMPTS][0]])} "
                f"failed {_MAX_ATTEMPTS} consecutive redraws"
            )
        keys = [(int(reps[i]), int(attempt[i])) for i in todo]
        if X is not None:
            lr_c, bt, at, ok = _fit_group(cfg, X, keys)
        else:
            parts = []
            for j, i in enumerate(todo):
                designs[i] = make_design(cfg, *keys[j])
                parts.append(_fit_group(cfg, designs[i], keys[j : j + 1]))
            lr_c, bt, at, ok = (np.concatenate(c) for c in zip(*parts))
        done = todo[ok]
        lr[done] = lr_c[ok]
        alpha_tilde[done] = at[ok]
        beta_tilde[done] = bt[ok]
        failed = todo[~ok]
        redraws += failed.size
        attempt[failed] += 1
        todo = failed

    if X is not None:
        B, _ = bartlett_B_batch(cfg.hypothesis, alpha_tilde, X)
    else:
        B = np.array([
            bartlett_B_batch(cfg.hypothesis, alpha_tilde[i : i + 1], designs[i])[0][0]
            for i in range(m)
        ])

    boot = np.zeros((m, len(cfg.levels)), dtype=bool)
    if cfg.bootstrap_B:
        for i in range(m):
            seq = child_sequence(cfg.seed, 2, int(reps[i]), int(attempt[i]))
            try:
                reps_b, _ = bootstrap_replicates(
                    X if X is not None else designs[i],
                    Theta(beta_tilde[i], alpha_tilde[i]), cfg.hypothesis,
                    cfg.bootstrap_B, seq, cfg.fit_options,
                )
            except ConvergenceError as exc:
                raise ExperimentAborted(f"replication {int(reps[i])}: {exc}") from exc
            boot[i] = [lr[i] > critical_value(reps_b, g) for g in cfg.levels]
    return lr, B, boot, redraws


def _simulate(cfg: SimConfig, threads: int = 1):
    X = make_design(cfg) if cfg.fixed_design else None
    chunks = [
        np.arange(s, min(s + cfg.chunk_size, cfg.replications))
        for s in range(0, cfg.replications, cfg.chunk_size)
    ]
    if threads > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_simulate_chunk, [cfg] * len(chunks), [X] * len(chunks), chunks))
    else:
        parts = [_simulate_chunk(cfg, X, c) for c in chunks]
    lr = np.concatenate([p[0] for p in parts])
    Bvals = np.concatenate([p[1] for p in parts])
    boot = np.concatenate([p[2] for p in parts])
    redraws = sum(p[3] for p in parts)
    if redraws > MAX_REDRAW_FRACTION * cfg.replications:
        raise ExperimentAborted(
            f"{redraws} replications had failed fits (limit {MAX_REDRAW_FRACTION:.0%} of "
            f"{cfg.replications}); n={cfg.n}, p={cfg.p}, alpha={cfg.alpha}"
        )
    q = cfg.hypothesis.q(cfg.p)
    bad = np.flatnonzero(~(1.0 + Bvals / q > 0))
    if bad.size:
        raise BartlettFactorError(
            f"non-positive Bartlett factor in replication {int(bad[0])} (B={Bvals[bad[0]]:.6g})"
        )
    return lr_statistics(lr, Bvals, q), q, boot, redraws


def _tally(cfg: SimConfig, stats, q, boot, names, redraws, elapsed) -> SimResult:
    R = cfg.replications
    rates, ses = {}, {}
    for name in names:
        for j, g in enumerate(cfg.levels):
            if name == "LR_boot":
                rej = boot[:, j]
            else:
                rej = stats[name] > chisq_quantile(1.0 - g, q)
            rate = 100.0 * np.count_nonzero(rej) / R
            rates[(name, g)] = rate
            ses[(name, g)] = mc_standard_error(rate, R)
    return SimResult(rates, ses, R, elapsed, redraws, cfg)


def run_null_rejection(cfg: SimConfig, threads: int = 1) -> SimResult:
    """Null rejection rates (percent) for each statistic and level."""
    if cfg.delta != 0.0:
        raise ValueError("run_null_rejection requires delta = 0")
    t0 = time.perf_counter()
    stats, q, boot, redraws = _simulate(cfg, threads)
    return _tally(cfg, stats, q, boot, cfg.all_statistics(), redraws, time.perf_counter() - t0)


def run_power(cfg: SimConfig, threads: int = 1) -> SimResult:
    """Non-null rejection rates with the restricted coefficients shifted by ``delta``.

    Only the corrected statistics are tallied unless ``cfg.statistics`` names
    others explicitly.  ``delta = 0`` gives the null rates.
    """
    if not isinstance(cfg.hypothesis, BetaSubset):
        raise ValueError("run_power needs a BetaSubset hypothesis")
    if cfg.delta < 0:
        raise ValueError("delta must be non-negative")
    if cfg.statistics == NULL_STATISTICS:
        cfg = replace(cfg, statistics=POWER_STATISTICS)
    t0 = time.perf_counter()
    stats, q, boot, redraws = _simulate(cfg, threads)
    return _tally(cfg, stats, q, boot, cfg.all_statistics(), redraws, time.perf_counter() - t0)


def quantile_discrepancy(cfg: SimConfig, grid=None, threads: int = 1) -> dict[str, list[float]]:
    """Relative quantile discrepancies ``(empirical - chi2) / chi2`` per statistic.

    Returns plot-ready columns: ``probability``, ``asymptotic`` and one
    column per statistic in ``cfg.statistics``.
    """
    if cfg.delta != 0.0:
        raise ValueError("quantile_discrepancy requires delta = 0")
    grid = np.asarray(default_grid() if grid is None else grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("grid must be a non-empty list of probabilities in (0, 1)")
    stats, q, _, _ = _simulate(cfg, threads)
    asym = np.asarray(chisq_quantile(grid, q), dtype=float).reshape(grid.shape)
    out = {"probability": grid.tolist(), "asymptotic": asym.tolist()}
    for name in cfg.statistics:
        emp = np.quantile(stats[name], grid)
        out[name] = ((emp - asym) / asym).tolist()
    return out


def default_grid() -> np.ndarray:
    return np.round(np.arange(0.05, 1.0, 0.05), 2)


# -- exact normal-theory level ---------------------------------------------------


def normal_true_level(n: int, gamma: float) -> float:
    """Exact size of the asymptotic LR test of a normal mean with unknown variance.

    The test rejects when ``sqrt(n) |zbar - mu0| / s > k`` with
    ``k = sqrt((exp(c/n) - 1)(n - 1))`` and ``c`` the chi2(1) upper-``gamma``
    point, so the size is ``2 P(t_{n-1} > k)``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    c = chisq_quantile(1.0 - gamma, 1)
    k = math.sqrt(math.expm1(c / n) * (n - 1))
    return 2.0 * student_t_cdf(-k, int(n) - 1)


def normal_level_table(ns=(5, 8, 12, 20, 50), gammas=(0.01, 0.05, 0.10)) -> list[dict]:
    return [
        {"n": n, "level": g, "rate": 100.0 * normal_true_level(n, g), "mc_se": 0.0}
        for n in ns
        for g in gammas
    ]


# -- table presets ---------------------------------------------------------------

PRESET_TABLES = (1, 2, 4, 5, 6, 7, 8)


def _subset_last_two(p):
    return BetaSubset((p - 2, p - 1))


def table_experiments(
    table: int,
    replications: int = 10_000,
    seed: int = 0,
    bootstrap_B: int | None = -1,
) -> list[tuple[dict, SimConfig, str]]:
    """Experiments behind simulation tables 1, 2 and 4-7.

    Returns ``(label, config, kind)`` triples with ``kind`` either ``"null"``
    or ``"power"``.  ``bootstrap_B=-1`` keeps each table's own bootstrap
    setting (600 replicates for tables 6 and 7); ``None`` or ``0`` disables it.
    """
    boot = 600 if bootstrap_B == -1 else (bootstrap_B or None)
    common = dict(replications=replications, seed=seed)
    out = []
    if table == 1:
        for p in range(3, 10):
            out.append(({"p": p}, SimConfig(30, p, 0.5, _subset_last_two(p), **common), "null"))
    elif table == 2:
        for n in (20, 30, 40, 50, 100, 200):
            out.append(({"n": n}, SimConfig(n, 6, 0.5, _subset_last_two(6), **common), "null"))
    elif table == 4:
        for n in (30, 50, 100):
            for d in (0.1, 0.2, 0.3, 0.4, 0.5):
                cfg = SimConfig(n, 4, 0.5, _subset_last_two(4), delta=d,
                                statistics=POWER_STATISTICS, **common)
                out.append(({"n": n, "delta": d}, cfg, "power"))
    elif table == 5:
        for p in (2, 3, 4):
            for a0 in (0.5, 1.0):
                out.append(({"p": p, "alpha0": a0}, SimConfig(30, p, a0, AlphaFixed(a0), **common), "null"))
    elif table == 6:
        for a in (0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 2.0, 10.0, 50.0, 100.0):
            cfg = SimConfig(25, 4, a, _subset_last_two(4), bootstrap_B=boot, **common)
            out.append(({"alpha": a}, cfg, "null"))
    elif table == 7:
        for rho in (0.0, 0.5, 0.9):
            cfg = SimConfig(20, 4, 0.5, BetaSubset((1, 3)), design=CollinearPair(rho),
                            bootstrap_B=boot, **common)
            out.append(({"rho": rho}, cfg, "null"))
    elif table == 8:
        raise ValueError("table 8 is exact; use normal_level_table()")
    else:
        raise ValueError(f"no simulation table {table}; available: {PRESET_TABLES}")
    return out


def figure_config(replications: int = 10_000, seed: int = 0) -> SimConfig:
    """Configuration behind the relative quantile discrepancy figure."""
    return SimConfig(30, 6, 0.5, _subset_last_two(6), replications=replications, seed=seed)
