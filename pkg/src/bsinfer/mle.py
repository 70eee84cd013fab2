"""Maximum likelihood fitting by BFGS with analytic gradients.

The optimiser works on ``(beta, log alpha)`` so that alpha stays positive,
starts from least squares plus the closed-form alpha, and seeds the inverse
Hessian with the inverse expected information.  It is vectorised over a batch
of response vectors that share one design matrix: each row carries its own
iterate, step length, inverse-Hessian approximation and convergence flag.
Single fits are batches of one, so the Monte Carlo code and the user-facing
functions run the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_full_rank
from .exceptions import ConvergenceError, DegenerateDataError
from .hypotheses import AlphaFixed, BetaFull, BetaSubset
from .model import Dataset, Theta, _loglik_batch, _loglik_grad_batch, alpha_closed_form
from .specfun import _psi_arrays

__all__ = [
    "FitOptions",
    "FitResult",
    "BatchFit",
    "ols_init",
    "fit_full",
    "fit_restricted",
    "fit_full_batch",
    "fit_restricted_batch",
    "ALPHA_FLOOR",
]

ALPHA_FLOOR = 1e-8
_ARMIJO_C1 = 1e-4
_MAX_BACKTRACK = 60
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FitOptions:
    grad_tol: float = 1e-8
    max_iter: int = 200
    ls_shrink: float = 0.5

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not 0.0 < self.ls_shrink < 1.0:
            raise ValueError("ls_shrink must lie in (0, 1)")


@dataclass
class FitResult:
    """Outcome of one fit.

    ``std_errors`` come from the inverse expected information at the
    estimate; parameters held fixed by a null hypothesis get 0.
    """

    theta_hat: Theta
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    std_errors: np.ndarray


@dataclass
class BatchFit:
    beta: np.ndarray
    alpha: np.ndarray
    loglik: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    grad_norm: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __len__(self):
        return self.alpha.shape[0]

    def row(self, i: int) -> tuple[Theta, float]:
        return Theta(self.beta[i], self.alpha[i]), float(self.loglik[i])


# -- core optimiser ------------------------------------------------------------


def _bfgs(fun, x0: np.ndarray, H0: np.ndarray, opts: FitOptions, f_scale: np.ndarray):
    """Maximise ``fun`` row-wise.

    ``fun(x, rows)`` returns ``(f, g)`` for the parameter rows ``x`` belonging
    to batch members ``rows``.  ``f_scale`` bounds the magnitude of the terms
    summed into ``f`` and sets the rounding-noise floor for the line search.
    Returns ``(x, f, g, converged, iterations)``.
    """
    m, k = x0.shape
    x = x0.copy()
    H = H0.copy()
    all_rows = np.arange(m)
    f, g = fun(x, all_rows)
    iters = np.zeros(m, dtype=int)
    converged = np.zeros(m, dtype=bool)
    active = np.isfinite(f)

    def check(rows):
        tol = opts.grad_tol * np.maximum(1.0, np.abs(f[rows]))
        return np.max(np.abs(g[rows]), axis=1) < tol

    if k == 0:
        return x, f, g, active.copy(), iters
    done = check(all_rows) & active
    converged |= done
    active &= ~done

    for _ in range(opts.max_iter):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        d = np.einsum("rij,rj->ri", H[rows], g[rows])
        slope = np.einsum("ri,ri->r", g[rows], d)
        # lost positive-definiteness: restart from the seed metric
        reset = ~(slope > 0)
        if np.any(reset):
            rr = rows[reset]
            H[rr] = H0[rr]
            d[reset] = np.einsum("rij,rj->ri", H[rr], g[rr])
            slope[reset] = np.einsum("ri,ri->r", g[rr], d[reset])

        t = np.ones(rows.size)
        accepted = np.zeros(rows.size, dtype=bool)
        x_new = x[rows].copy()
        f_new = np.full(rows.size, -np.inf)
        g_new = np.zeros((rows.size, k))
        pending = np.arange(rows.size)
        for _ls in range(_MAX_BACKTRACK):
            if pending.size == 0:
                break
            cand = x[rows[pending]] + t[pending, None] * d[pending]
            fc, gc = fun(cand, rows[pending])
            f0 = f[rows[pending]]
            gain = _ARMIJO_C1 * t[pending] * slope[pending]
            # Once the predicted gain is below the resolution of f, Armijo only
            # compares rounding noise; fall back to a gradient-norm decrease.
            noise = 8 * _EPS * f_scale[rows[pending]]
            flat = (gain <= noise) & (fc >= f0 - noise) & (
                np.max(np.abs(gc), axis=1) < np.max(np.abs(g[rows[pending]]), axis=1)
            )
            ok = np.isfinite(fc) & ((fc >= f0 + gain) | flat)
            acc = pending[ok]
            accepted[acc] = True
            x_new[acc] = cand[ok]
            f_new[acc] = fc[ok]
            g_new[acc] = gc[ok]
            pending = pending[~ok]
            t[pending] *= opts.ls_shrink

        stalled = rows[~accepted]
        active[stalled] = False
        rows_acc = rows[accepted]
        if rows_acc.size == 0:
            continue
        s = x_new[accepted] - x[rows_acc]
        yv = g[rows_acc] - g_new[accepted]
        sy = np.einsum("ri,ri->r", s, yv)
        x[rows_acc] = x_new[accepted]
        f[rows_acc] = f_new[accepted]
        g[rows_acc] = g_new[accepted]
        iters[rows_acc] += 1

        curv = sy > 1e-12 * np.linalg.norm(s, axis=1) * np.linalg.norm(yv, axis=1)
        if np.any(curv):
            ru = rows_acc[curv]
            su, yu, rho = s[curv], yv[curv], 1.0 / sy[curv]
            Hk = H[ru]
            Hy = np.einsum("rij,rj->ri", Hk, yu)
            yHy = np.einsum("ri,ri->r", yu, Hy)
            H[ru] = (
                Hk
                - rho[:, None, None] * (su[:, :, None] * Hy[:, None, :] + Hy[:, :, None] * su[:, None, :])
                + ((rho * rho * yHy + rho)[:, None, None]) * su[:, :, None] * su[:, None, :]
            )
        done = check(rows_acc)
        converged[rows_acc[done]] = True
        active[rows_acc[done]] = False

    return x, f, g, converged, iters


# -- parameterisations ---------------------------------------------------------


def _xtx_inv(X: np.ndarray) -> np.ndarray:
    r = np.linalg.qr(X, mode="r")
    rinv = np.linalg.inv(r)
    return rinv @ rinv.T


def _ols(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(X)
    return np.linalg.solve(r, q.T @ Y.T).T


def _f_scale(n: int, alpha: np.ndarray) -> np.ndarray:
    # rough bound on the summed magnitudes in the log-likelihood
    return n * (3.0 + np.abs(np.log(alpha)))


def _fit_beta_alpha(Y: np.ndarray, X: np.ndarray, opts: FitOptions, start=None):
    """Joint fit of beta and log alpha for each row of Y (offsets already removed)."""
    m, n = Y.shape
    p = X.shape[1]
    if start is None:
        beta0 = _ols(Y, X)
        alpha0 = alpha_closed_form(Y - beta0 @ X.T)
    else:
        beta0 = np.array(start[0], dtype=float).reshape(m, p)
        alpha0 = np.array(start[1], dtype=float).reshape(m)
    degenerate = ~(alpha0 >= ALPHA_FLOOR)
    alpha0 = np.maximum(np.nan_to_num(alpha0, nan=ALPHA_FLOOR), ALPHA_FLOOR)

    xtx_inv = _xtx_inv(X)
    psi1 = _psi_arrays(alpha0)[1]
    H0 = np.zeros((m, p + 1, p + 1))
    H0[:, :p, :p] = (4.0 / psi1)[:, None, None] * xtx_inv
    H0[:, p, p] = 1.0 / (2.0 * n)

    def fun(z, rows):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            resid = Y[rows] - z[:, :p] @ X.T
            alpha = np.exp(z[:, p])
            ll, gb, ga = _loglik_grad_batch(resid, alpha, X)
        return ll, np.column_stack([gb, ga])

    z0 = np.column_stack([beta0, np.log(alpha0)])
    z, f, g, conv, iters = _bfgs(fun, z0, H0, opts, _f_scale(n, alpha0))
    conv &= ~degenerate
    return z[:, :p], np.exp(z[:, p]), f, conv, iters, np.max(np.abs(g), axis=1), degenerate


def _fit_beta_given_alpha(Y: np.ndarray, X: np.ndarray, alpha: float, opts: FitOptions):
    m, _ = Y.shape
    p = X.shape[1]
    a = np.full(m, alpha)
    beta0 = _ols(Y, X)
    psi1 = float(_psi_arrays(alpha)[1])
    H0 = np.broadcast_to((4.0 / psi1) * _xtx_inv(X), (m, p, p)).copy()

    def fun(b, rows):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ll, gb, _ = _loglik_grad_batch(Y[rows] - b @ X.T, a[rows], X)
        return ll, gb

    b, f, g, conv, iters = _bfgs(fun, beta0, H0, opts, _f_scale(Y.shape[1], a))
    return b, a, f, conv, iters, np.max(np.abs(g), axis=1, initial=0.0)


def _closed_form_alpha(R: np.ndarray):
    alpha = alpha_closed_form(R)
    degenerate = ~(alpha >= ALPHA_FLOOR)
    safe = np.maximum(np.nan_to_num(alpha, nan=ALPHA_FLOOR), ALPHA_FLOOR)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ll = _loglik_batch(R, safe)
    return safe, ll, degenerate


# -- batched public API --------------------------------------------------------


def fit_full_batch(Y, X, opts: FitOptions | None = None, start=None) -> BatchFit:
    """Unrestricted fits of every row of ``Y`` (m x n) against design ``X``.

    ``start`` optionally gives ``(beta, alpha)`` starting points per row in
    place of least squares.
    """
    opts = opts or FitOptions()
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    beta, alpha, ll, conv, iters, gn, degen = _fit_beta_alpha(Y, X, opts, start)
    return BatchFit(beta, alpha, ll, conv, iters, gn, degen)


def fit_restricted_batch(Y, X, h, opts: FitOptions | None = None) -> BatchFit:
    """Fits of every row of ``Y`` under the null hypothesis ``h``."""
    opts = opts or FitOptions()
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    m = Y.shape[0]
    p = X.shape[1]
    h.validate(p)
    if isinstance(h, AlphaFixed):
        beta, alpha, ll, conv, iters, gn = _fit_beta_given_alpha(Y, X, h.alpha0, opts)
        return BatchFit(beta, alpha, ll, conv, iters, gn, np.zeros(m, dtype=bool))
    if isinstance(h, BetaFull):
        fixed = np.asarray(h.values)
        alpha, ll, degen = _closed_form_alpha(Y - X @ fixed)
        return BatchFit(
            np.tile(fixed, (m, 1)), alpha, ll, ~degen, np.zeros(m, dtype=int),
            np.zeros(m), degen,
        )
    if isinstance(h, BetaSubset):
        if h.q(p) == 0:
            return fit_full_batch(Y, X, opts)
        free = h.free_indices(p)
        idx = np.asarray(h.indices)
        vals = np.asarray(h.values)
        R = Y - X[:, idx] @ vals
        beta = np.empty((m, p))
        beta[:, idx] = vals
        if free.size == 0:
            alpha, ll, degen = _closed_form_alpha(R)
            return BatchFit(beta, alpha, ll, ~degen, np.zeros(m, dtype=int), np.zeros(m), degen)
        X1 = X[:, free]
        check_full_rank(X1, name="X with restricted columns removed")
        b1, alpha, ll, conv, iters, gn, degen = _fit_beta_alpha(R, X1, opts)
        beta[:, free] = b1
        return BatchFit(beta, alpha, ll, conv, iters, gn, degen)
    raise TypeError(f"unsupported hypothesis {h!r}")


# -- single-fit API ------------------------------------------------------------


def ols_init(data: Dataset) -> Theta:
    """Least-squares beta and the closed-form alpha at it (clamped at ALPHA_FLOOR)."""
    beta = _ols(data.y[None, :], data.X)[0]
    alpha = float(alpha_closed_form(data.y - data.X @ beta)[0])
    return Theta(beta, max(alpha, ALPHA_FLOOR))


def _std_errors(X: np.ndarray, free: np.ndarray, alpha: float, alpha_free: bool) -> np.ndarray:
    p = X.shape[1]
    se = np.zeros(p + 1)
    if free.size:
        psi1 = float(_psi_arrays(alpha)[1])
        se[free] = np.sqrt(np.diag(4.0 * _xtx_inv(X[:, free]) / psi1))
    if alpha_free:
        se[p] = alpha / np.sqrt(2.0 * X.shape[0])
    return se


def _to_result(fit: BatchFit, data: Dataset, free: np.ndarray, alpha_free: bool) -> FitResult:
    if fit.degenerate is not None and fit.degenerate[0]:
        raise DegenerateDataError(
            "response lies in the column space of the design (alpha estimate ~ 0); "
            "the likelihood is unbounded"
        )
    theta, ll = fit.row(0)
    return FitResult(
        theta_hat=theta,
        loglik=ll,
        converged=bool(fit.converged[0]),
        iterations=int(fit.iterations[0]),
        grad_norm=float(fit.grad_norm[0]),
        std_errors=_std_errors(data.X, free, theta.alpha, alpha_free),
    )


def fit_full(data: Dataset, opts: FitOptions | None = None) -> FitResult:
    """Maximum likelihood estimate of ``(beta, alpha)``.

    Non-convergence is reported through ``converged=False``.  Raises
    :class:`DegenerateDataError` when ``y`` is exactly linear in ``X``.
    """
    fit = fit_full_batch(data.y[None, :], data.X, opts)
    return _to_result(fit, data, np.arange(data.p), True)


def fit_restricted(data: Dataset, h, opts: FitOptions | None = None) -> FitResult:
    """Maximum likelihood estimate under the null hypothesis ``h``."""
    fit = fit_restricted_batch(data.y[None, :], data.X, h, opts)
    if isinstance(h, AlphaFixed):
        free, alpha_free = np.arange(data.p), False
    elif isinstance(h, BetaFull):
        free, alpha_free = np.arange(0), True
    else:
        free, alpha_free = h.free_indices(data.p), True
    return _to_result(fit, data, free, alpha_free)


def require_converged(result: FitResult, what: str = "fit") -> FitResult:
    if not result.converged:
        raise ConvergenceError(
            f"{what} did not converge after {result.iterations} iterations "
            f"(max |gradient| = {result.grad_norm:.3g})"
        )
    return result
