"""Command-line interface: ``bsinfer fit | test | simulate | simulate-data``.

Exit codes: 0 success, 1 bad input, 2 rank-deficient design, 3 non-convergence
or degenerate data, 4 aborted simulation.  Errors go to stderr as one line,
``bsinfer: error[<kind>]: <message>``.

Every output is accompanied by a run manifest (command, arguments, seed,
version, wall-clock time, input checksum).  It is written next to the output
file (``<output>.manifest.json`` or ``manifest.json`` in ``--out``), or to
stderr as a ``manifest:`` line when results go to stdout, so the results
themselves stay byte-identical across runs with the same seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import (
    BartlettFactorError,
    ConvergenceError,
    DegenerateDataError,
    RankDeficientError,
)
from .hypotheses import AlphaFixed, BetaFull, BetaSubset
from .mle import FitOptions, fit_full
from .model import Dataset
from .rng import fresh_seed, stream

EXIT_INPUT, EXIT_RANK, EXIT_CONVERGENCE, EXIT_ABORTED = 1, 2, 3, 4
INTERCEPT = "intercept"


class InputError(ValueError):
    """Bad command-line input (unreadable CSV, unknown column, bad spec)."""


# -- data ingestion --------------------------------------------------------------


def read_csv(path: str) -> tuple[list[str], np.ndarray, str]:
    """Read a numeric CSV with a header row; returns ``(names, values, sha256)``."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not UTF-8") from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path} is empty")
    names = [h.strip() for h in rows[0]]
    if len(set(names)) != len(names) or any(not h for h in names):
        raise InputError(f"{path}: header must contain unique non-empty names")
    values = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise InputError(f"{path}: row {i} has {len(row)} fields, expected {len(names)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                what = "missing value" if not cell else f"non-numeric value {cell!r}"
                raise InputError(f"{path}: {what} at row {i}, column {names[j]!r}")
            values[i - 2, j] = v
    return names, values, digest


def parse_derive(spec: str) -> tuple[str, list[str]]:
    """``"x12=x1*x2"`` -> ``("x12", ["x1", "x2"])``."""
    name, sep, expr = spec.partition("=")
    factors = [f.strip() for f in expr.split("*")]
    if not sep or not name.strip() or not all(factors):
        raise InputError(f"cannot parse --derive {spec!r}; expected name=col1*col2")
    return name.strip(), factors


def build_dataset(args, names: list[str], values: np.ndarray) -> tuple[Dataset, list[str]]:
    cols = {n: values[:, j] for j, n in enumerate(names)}
    derived = []
    for spec in args.derive or []:
        name, factors = parse_derive(spec)
        if name in cols:
            raise InputError(f"--derive: column {name!r} already exists")
        missing = [f for f in factors if f not in cols]
        if missing:
            raise InputError(f"--derive {spec!r}: unknown column {missing[0]!r}")
        cols[name] = np.prod([cols[f] for f in factors], axis=0)
        derived.append(name)

    if args.response not in cols:
        raise InputError(f"unknown response column {args.response!r}")
    if args.covariates is None:
        covs = [n for n in names if n != args.response] + derived
    else:
        covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
        covs += [d for d in derived if d not in covs]
    for c in covs:
        if c not in cols:
            raise InputError(f"unknown covariate column {c!r}")
        if c == args.response:
            raise InputError(f"response {c!r} cannot also be a covariate")
    if len(set(covs)) != len(covs):
        raise InputError("covariate list contains duplicates")

    y = cols[args.response]
    if args.log:
        if np.any(y <= 0):
            bad = int(np.flatnonzero(y <= 0)[0]) + 2
            raise InputError(f"--log needs positive lifetimes; row {bad} has {y[bad - 2]:g}")
        y = np.log(y)
    blocks, coef_names = [], []
    if not args.no_intercept:
        blocks.append(np.ones(len(y)))
        coef_names.append(INTERCEPT)
    blocks += [cols[c] for c in covs]
    coef_names += covs
    if not blocks:
        raise InputError("model has no coefficients")
    X = np.column_stack(blocks)
    n, p = X.shape
    if n <= p:
        raise InputError(f"need more observations ({n}) than coefficients ({p})")
    return Dataset(y, X), coef_names


def parse_null(spec: str, coef_names: list[str]):
    """``"x4=0,x5=0"`` -> BetaSubset/BetaFull, ``"alpha=0.5"`` -> AlphaFixed."""
    pairs = []
    for part in spec.split(","):
        name, sep, val = part.partition("=")
        name = name.strip()
        try:
            v = float(val)
        except ValueError:
            v = math.nan
        if not sep or not name or not math.isfinite(v):
            raise InputError(f"cannot parse null {spec!r}; expected name=value[,name=value...]")
        pairs.append((name, v))
    names = [n for n, _ in pairs]
    if len(set(names)) != len(names):
        raise InputError(f"null {spec!r} names a parameter twice")
    if "alpha" in names and "alpha" not in coef_names:
        if len(pairs) != 1:
            raise InputError("a null on alpha cannot be combined with coefficient restrictions")
        if pairs[0][1] <= 0:
            raise InputError("alpha under the null must be positive")
        return AlphaFixed(pairs[0][1])
    for n in names:
        if n not in coef_names:
            raise InputError(f"null names unknown coefficient {n!r}; have {', '.join(coef_names)}")
    idx = [coef_names.index(n) for n in names]
    vals = [v for _, v in pairs]
    if len(idx) == len(coef_names):
        order = np.argsort(idx)
        return BetaFull(tuple(np.asarray(vals)[order]))
    return BetaSubset(tuple(idx), tuple(vals))


# -- seeds, manifests, output ----------------------------------------------------


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("BSINFER_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"BSINFER_SEED={env!r} is not an integer") from exc
    return fresh_seed()


class Run:
    def __init__(self, command: str, argv: list[str]):
        self.command = command
        self.argv = argv
        self.started = datetime.now(timezone.utc)
        self.t0 = time.perf_counter()
        self.seed = None
        self.input_sha256 = None

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "version": __version__,
            "started": self.started.isoformat(timespec="seconds"),
            "wall_clock_seconds": round(time.perf_counter() - self.t0, 3),
            "input_sha256": self.input_sha256,
        }

    def emit(self, text: str, output: str | None) -> None:
        """Write ``text`` to ``output`` (or stdout) together with the manifest."""
        if output:
            path = Path(output)
            path.write_text(text, encoding="utf-8")
            path.with_name(path.name + ".manifest.json").write_text(
                json.dumps(self.manifest(), indent=2) + "\n", encoding="utf-8"
            )
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
            print("manifest: " + json.dumps(self.manifest()), file=sys.stderr)


def _fmt(x: float) -> str:
    return f"{x:.4f}" if abs(x) < 1e5 else f"{x:.4e}"


def _options(args) -> FitOptions:
    return FitOptions(grad_tol=args.grad_tol, max_iter=args.max_iter)


# -- commands --------------------------------------------------------------------


def cmd_fit(args, run: Run) -> int:
    names, values, run.input_sha256 = read_csv(args.data)
    data, coef_names = build_dataset(args, names, values)
    res = fit_full(data, _options(args))
    beta, se = res.theta_hat.beta, res.std_errors
    out = {
        "n": data.n,
        "p": data.p,
        "coefficients": {
            nm: {"estimate": float(b), "std_error": float(s)}
            for nm, b, s in zip(coef_names, beta, se[:-1])
        },
        "alpha": {"estimate": res.theta_hat.alpha, "std_error": float(se[-1])},
        "loglik": res.loglik,
        "converged": res.converged,
        "iterations": res.iterations,
    }
    if args.json:
        text = json.dumps(out, indent=2) + "\n"
    else:
        w = max(12, *(len(n) for n in coef_names))
        lines = [
            f"Birnbaum-Saunders regression: n = {data.n}, p = {data.p}"
            + (", response = log(" + args.response + ")" if args.log else ""),
            f"{'parameter':<{w}}  {'estimate':>12}  (std. error)",
        ]
        for nm, b, s in zip(coef_names, beta, se[:-1]):
            lines.append(f"{nm:<{w}}  {_fmt(b):>12}  ({_fmt(s)})")
        lines.append(f"{'alpha':<{w}}  {_fmt(res.theta_hat.alpha):>12}  ({_fmt(se[-1])})")
        lines.append(f"log-likelihood = {res.loglik:.4f}; iterations = {res.iterations}")
        text = "\n".join(lines) + "\n"
    run.emit(text, args.output)
    if not res.converged:
        raise ConvergenceError(
            f"fit did not converge after {res.iterations} iterations "
            f"(max |gradient| = {res.grad_norm:.3g})"
        )
    return 0


def cmd_test(args, run: Run) -> int:
    from .testing import bootstrap_test, lr_test

    names, values, run.input_sha256 = read_csv(args.data)
    data, coef_names = build_dataset(args, names, values)
    h = parse_null(args.null, coef_names)
    opts = _options(args)
    report = lr_test(data, h, opts, bartlett_at=args.bartlett_at)
    out = {"null": args.null, **report.to_dict(), "bootstrap": None}
    if args.bootstrap:
        run.seed = resolve_seed(args.seed)
        boot = bootstrap_test(data, h, B=args.bootstrap, seed=run.seed, opts=opts)
        out["bootstrap"] = boot.to_dict()
    if args.json:
        text = json.dumps(out, indent=2) + "\n"
    else:
        bf = out["bartlett"]
        lines = [
            f"H0: {args.null}   (q = {report.df} restrictions, n = {data.n}, p = {data.p})",
            f"{'statistic':<10} {'value':>10} {'p-value':>10}",
        ]
        for key, label in (("lr", "LR"), ("lr_b", "LR_b"), ("lr_b_star", "LR_b*"), ("lr_b_2star", "LR_b**")):
            lines.append(f"{label:<10} {out[key]:>10.4f} {out['p_values'][key]:>10.4f}")
        lines.append(f"Bartlett B = {bf['B']:.4f}, c = {bf['c']:.4f}")
        if out["bootstrap"]:
            b = out["bootstrap"]
            crit = ", ".join(f"{k}: {v:.4f}" for k, v in b["critical_values"].items())
            lines.append(
                f"bootstrap (B = {b['B']}, seed = {b['seed']}): p-value = {b['p_value']:.4f}; "
                f"critical values {crit}"
            )
        text = "\n".join(lines) + "\n"
    run.emit(text, args.output)
    return 0


def cmd_simulate_data(args, run: Run) -> int:
    run.seed = resolve_seed(args.seed)
    n, p = args.n, args.p
    if p < 1 or n <= p:
        raise InputError(f"need n > p >= 1, got n={n}, p={p}")
    if not args.alpha > 0:
        raise InputError("--alpha must be positive")
    if args.beta is None:
        beta = np.ones(p)
    else:
        try:
            beta = np.array([float(b) for b in args.beta.split(",")])
        except ValueError as exc:
            raise InputError(f"cannot parse --beta {args.beta!r}") from exc
        if beta.size != p:
            raise InputError(f"--beta has {beta.size} values for p = {p}")
    X = np.column_stack([np.ones(n), stream(run.seed, 0).uniform(size=(n, p - 1))])
    z = stream(run.seed, 1).standard_normal(n)
    y = X @ beta + 2.0 * np.arcsinh(0.5 * args.alpha * z)
    header = [f"x{j}" for j in range(1, p)] + ["t" if args.lifetime else "y"]
    resp = np.exp(y) if args.lifetime else y
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for i in range(n):
        wr.writerow([repr(float(v)) for v in X[i, 1:]] + [repr(float(resp[i]))])
    run.emit(buf.getvalue(), args.output)
    return 0


def _rates_csv(rows: list[dict], label_keys: list[str]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(label_keys + ["statistic", "level", "rate", "mc_se"])
    for r in rows:
        wr.writerow(
            [r[k] for k in label_keys]
            + [r["statistic"], f"{r['level']:g}", f"{r['rate']:.4f}", f"{r['mc_se']:.4f}"]
        )
    return buf.getvalue()


def _columns_csv(cols: dict[str, list[float]]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    keys = list(cols)
    wr.writerow(keys)
    for row in zip(*cols.values()):
        wr.writerow([f"{v:.6g}" for v in row])
    return buf.getvalue()


def _custom_config(args, seed: int):
    from .montecarlo import CollinearPair, SimConfig, UniformIID

    if args.n is None or args.p is None or args.alpha is None:
        raise InputError("simulate needs --table, --figure or all of --n, --p, --alpha")
    if (args.q is None) == (args.alpha0 is None):
        raise InputError("give exactly one of --q (restrict the last q coefficients) or --alpha0")
    if args.q is not None:
        if not 1 <= args.q < args.p:
            raise InputError(f"--q must lie in 1..{args.p - 1}")
        h = BetaSubset(tuple(range(args.p - args.q, args.p)))
    else:
        h = AlphaFixed(args.alpha0)
    design = UniformIID() if args.rho is None else CollinearPair(args.rho)
    return SimConfig(
        args.n, args.p, args.alpha, h,
        replications=args.replications or 10_000, seed=seed, design=design,
        delta=args.delta, bootstrap_B=args.bootstrap or None,
        fixed_design=not args.random_design,
    )


def cmd_simulate(args, run: Run) -> int:
    import dataclasses

    from . import montecarlo as mc

    out_dir = Path(args.out) if args.out else None
    files: dict[str, str] = {}
    if args.table == 8:
        files["rates.csv"] = _rates_csv(
            [dict(r, statistic="LR") for r in mc.normal_level_table()], ["n"]
        )
    else:
        run.seed = resolve_seed(args.seed)
        reps = args.replications or 10_000
        if args.figure is not None:
            if args.figure != 1:
                raise InputError(f"no figure {args.figure}; available: 1")
            cfg = dataclasses.replace(
                mc.figure_config(reps, run.seed), fixed_design=not args.random_design
            )
            files["discrepancy.csv"] = _columns_csv(mc.quantile_discrepancy(cfg, threads=args.threads))
        else:
            if args.table is not None:
                if args.table not in mc.PRESET_TABLES:
                    raise InputError(
                        f"no table {args.table}; available: {', '.join(map(str, mc.PRESET_TABLES))}"
                    )
                boot = -1 if args.bootstrap is None else args.bootstrap
                exps = mc.table_experiments(args.table, reps, run.seed, boot)
            else:
                cfg = _custom_config(args, run.seed)
                exps = [({}, cfg, "power" if cfg.delta else "null")]
            rows, label_keys = [], list(exps[0][0])
            for label, cfg, kind in exps:
                cfg = dataclasses.replace(cfg, fixed_design=not args.random_design)
                fn = mc.run_power if kind == "power" else mc.run_null_rejection
                res = fn(cfg, threads=args.threads)
                rows += [dict(label, **r) for r in res.rows()]
                if args.verbose:
                    print(f"done {label or cfg} in {res.elapsed:.1f}s", file=sys.stderr)
            files["rates.csv"] = _rates_csv(rows, label_keys)
    if out_dir is None:
        for text in files.values():
            sys.stdout.write(text)
        print("manifest: " + json.dumps(run.manifest()), file=sys.stderr)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out_dir / name).write_text(text, encoding="utf-8")
        (out_dir / "manifest.json").write_text(
            json.dumps(run.manifest(), indent=2) + "\n", encoding="utf-8"
        )
    return 0


# -- argument parsing --------------------------------------------------------------


def _add_model_args(sp):
    sp.add_argument("data", help="CSV file with a header row")
    sp.add_argument("--response", "-r", required=True, help="response column")
    sp.add_argument("--covariates", "-c", help="comma-separated covariate columns (default: all others)")
    sp.add_argument("--no-intercept", action="store_true", help="omit the intercept column")
    sp.add_argument("--log", action="store_true", help="response is a lifetime T; model log T")
    sp.add_argument("--derive", action="append", metavar="NAME=A*B",
                    help="add a product column, e.g. x12=x1*x2 (repeatable)")
    sp.add_argument("--grad-tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--json", action="store_true", help="emit JSON instead of text")
    sp.add_argument("--output", "-o", help="write to this file (manifest alongside)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bsinfer",
        description="Birnbaum-Saunders regression: fitting, corrected LR tests, simulations.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="maximum likelihood fit")
    _add_model_args(sp)

    sp = sub.add_parser("test", help="likelihood ratio tests of a null hypothesis")
    _add_model_args(sp)
    sp.add_argument("--null", required=True, help='e.g. "x4=0,x5=0" or "alpha=0.5"')
    sp.add_argument("--bootstrap", type=int, metavar="B", help="add a parametric bootstrap test")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--bartlett-at", choices=("restricted", "full"), default="restricted")

    sp = sub.add_parser("simulate", help="Monte Carlo size/power experiments")
    sp.add_argument("--table", type=int, help="preset: 1, 2, 4, 5, 6, 7 or 8")
    sp.add_argument("--figure", type=int, help="preset: 1 (quantile discrepancies)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--q", type=int, help="restrict the last q coefficients to 0")
    sp.add_argument("--alpha0", type=float, help="test alpha = alpha0 instead")
    sp.add_argument("--delta", type=float, default=0.0, help="power offset for restricted coefficients")
    sp.add_argument("--rho", type=float, help="use the collinear design (p = 4)")
    sp.add_argument("--bootstrap", type=int, metavar="B", help="bootstrap replicates (0 disables)")
    sp.add_argument("--random-design", action="store_true", help="draw a new design per replication")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", help="directory for rates.csv and manifest.json")
    sp.add_argument("--verbose", "-v", action="store_true")

    sp = sub.add_parser("simulate-data", help="write a synthetic CSV")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True, help="coefficients including the intercept")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--beta", help="comma-separated coefficients (default all 1)")
    sp.add_argument("--lifetime", action="store_true", help="write T = exp(y) in column t")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--output", "-o")
    return ap


COMMANDS = {"fit": cmd_fit, "test": cmd_test, "simulate": cmd_simulate, "simulate-data": cmd_simulate_data}


def _fail(kind: str, code: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"bsinfer: error[{kind}]: {msg}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    if getattr(args, "threads", 1) < 1:
        return _fail("input", EXIT_INPUT, ValueError("--threads must be >= 1"))
    run = Run(args.command, argv)
    from .montecarlo import ExperimentAborted

    try:
        return COMMANDS[args.command](args, run)
    except RankDeficientError as exc:
        return _fail("rank", EXIT_RANK, exc)
    except DegenerateDataError as exc:
        return _fail("degenerate", EXIT_CONVERGENCE, exc)
    except ExperimentAborted as exc:
        return _fail("aborted", EXIT_ABORTED, exc)
    except ConvergenceError as exc:
        return _fail("convergence", EXIT_CONVERGENCE, exc)
    except BartlettFactorError as exc:
        return _fail("bartlett", EXIT_CONVERGENCE, exc)
    except (InputError, ValueError, TypeError) as exc:
        return _fail("input", EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
