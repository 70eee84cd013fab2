from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

import bsinfer.montecarlo as mc
from bsinfer.hypotheses import AlphaFixed, BetaSubset
from bsinfer.montecarlo import (
    CollinearPair,
    ExperimentAborted,
    SimConfig,
    make_collinear_design,
    normal_true_level,
    quantile_discrepancy,
    run_null_rejection,
    run_power,
    table_experiments,
)
from bsinfer.rng import stream

TABLE_NORMAL_LEVEL = {  # n: (1%, 5%, 10%)
    5: (2.91, 9.79, 16.54),
    8: (1.97, 7.64, 13.72),
    12: (1.58, 6.64, 12.35),
    20: (1.32, 5.93, 11.35),
    50: (1.12, 5.36, 10.52),
}


def small_cfg(**kw):
    base = dict(n=20, p=4, alpha=0.5, hypothesis=BetaSubset((2, 3)), replications=400, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_normal_true_level_table():
    for n, row in TABLE_NORMAL_LEVEL.items():
        for g, want in zip((0.01, 0.05, 0.10), row):
            assert 100 * normal_true_level(n, g) == pytest.approx(want, abs=0.01)


def test_normal_true_level_limit_and_domain():
    for g in (0.01, 0.05, 0.1):
        assert normal_true_level(10**6, g) == pytest.approx(g, abs=1e-3)
    for bad in ((1, 0.05), (5, 0.0), (5, 1.0), (2.5, 0.05)):
        with pytest.raises(ValueError):
            normal_true_level(*bad)


def test_collinear_design():
    n = 2000
    X = make_collinear_design(n, 0.0, stream(1))
    assert X.shape == (n, 4) and np.all(X[:, 0] == 1)
    assert np.all((X[:, 1] >= 0) & (X[:, 1] < 1))
    assert abs(np.corrcoef(X[:, 2], X[:, 3])[0, 1]) < 4 / math.sqrt(n)
    for j in (2, 3):
        assert abs(X[:, j].var(ddof=1) - 1) < 4 * math.sqrt(2 / n)
    X9 = make_collinear_design(n, 0.9, stream(2))
    assert np.corrcoef(X9[:, 2], X9[:, 3])[0, 1] == pytest.approx(0.9, abs=4 / math.sqrt(n))
    for bad in (1.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            make_collinear_design(10, bad, stream(0))


def test_determinism_independent_of_workers():
    cfg = small_cfg(chunk_size=100)
    a = run_null_rejection(cfg, threads=1)
    b = run_null_rejection(cfg, threads=2)
    c = run_null_rejection(cfg, threads=1)
    assert a.rejection_rates == b.rejection_rates == c.rejection_rates
    d = run_null_rejection(dataclasses.replace(cfg, seed=4))
    assert d.rejection_rates != a.rejection_rates


def test_result_shape_and_standard_errors():
    res = run_null_rejection(small_cfg())
    assert set(res.rejection_rates) == {(s, g) for s in ("LR", "LR_b", "LR_b_star") for g in (0.1, 0.05, 0.01)}
    for key, r in res.rejection_rates.items():
        assert 0 <= r <= 100
        assert res.mc_standard_errors[key] == pytest.approx(100 * math.sqrt(r / 100 * (1 - r / 100) / 400))
    assert res.replications_used == 400 and res.elapsed > 0
    assert len(res.rows()) == 9


def test_median_level():
    cfg = SimConfig(200, 3, 0.5, BetaSubset((2,)), levels=(0.5,), replications=4000, seed=8)
    res = run_null_rejection(cfg)
    for s in ("LR_b", "LR_b_star"):
        assert abs(res.rate(s, 0.5) - 50) < 3 * res.se(s, 0.5)


def test_power_at_zero_delta_is_null():
    cfg = small_cfg()
    null = run_null_rejection(cfg)
    power = run_power(cfg)
    assert set(power.rejection_rates) == {(s, g) for s in ("LR_b", "LR_b_star") for g in cfg.levels}
    for k, v in power.rejection_rates.items():
        assert v == null.rejection_rates[k]


def test_power_monotone_in_delta():
    rates, ses = [], []
    for d in (0.1, 0.2, 0.3, 0.4, 0.5):
        res = run_power(small_cfg(n=30, delta=d, replications=2000))
        rates.append(res.rate("LR_b", 0.05))
        ses.append(res.se("LR_b", 0.05))
    for i in range(4):
        assert rates[i + 1] >= rates[i] - 2 * math.hypot(ses[i], ses[i + 1])
    assert rates[-1] > rates[0]


def test_per_replication_design():
    cfg = small_cfg(replications=200, fixed_design=False, chunk_size=64)
    a = run_null_rejection(cfg)
    assert a.rejection_rates == run_null_rejection(cfg, threads=2).rejection_rates
    assert a.rejection_rates != run_null_rejection(dataclasses.replace(cfg, fixed_design=True)).rejection_rates


def test_power_validation():
    with pytest.raises(ValueError):
        run_power(small_cfg(hypothesis=AlphaFixed(0.5)))
    with pytest.raises(ValueError):
        run_null_rejection(small_cfg(delta=0.2))


def test_alpha_hypothesis_run():
    res = run_null_rejection(small_cfg(hypothesis=AlphaFixed(0.5), p=2))
    assert res.rate("LR", 0.1) >= 0


def test_bootstrap_column():
    res = run_null_rejection(small_cfg(replications=100, bootstrap_B=49))
    assert ("LR_boot", 0.05) in res.rejection_rates


def test_collinear_config():
    res = run_null_rejection(small_cfg(hypothesis=BetaSubset((1, 3)), design=CollinearPair(0.9)))
    assert 0 <= res.rate("LR", 0.1) <= 100
    with pytest.raises(ValueError):
        small_cfg(p=5, hypothesis=BetaSubset((3, 4)), design=CollinearPair(0.5))


def test_quantile_discrepancy_shape():
    out = quantile_discrepancy(small_cfg(), [0.5])
    assert set(out) == {"probability", "asymptotic", "LR", "LR_b", "LR_b_star"}
    assert all(len(v) == 1 for v in out.values())
    with pytest.raises(ValueError):
        quantile_discrepancy(small_cfg(), [1.5])


def test_quantile_discrepancy_large_sample():
    cfg = SimConfig(500, 4, 0.5, BetaSubset((2, 3)), replications=10_000, seed=21)
    grid = np.round(np.arange(0.2, 0.96, 0.05), 2)
    out = quantile_discrepancy(cfg, grid)
    for s in ("LR", "LR_b", "LR_b_star"):
        assert np.max(np.abs(out[s])) < 0.05


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(replications=99)
    with pytest.raises(ValueError):
        small_cfg(n=4)
    with pytest.raises(ValueError):
        small_cfg(levels=(0.0,))
    with pytest.raises(ValueError):
        small_cfg(hypothesis=AlphaFixed(0.7))  # H0 must hold under the null run
    with pytest.raises(ValueError):
        small_cfg(bootstrap_B=5)


def test_abort_when_fits_fail(monkeypatch):
    def flaky(Y, X, h, opts):
        m = Y.shape[0]
        ok = np.ones(m, dtype=bool)
        ok[: max(1, m // 10)] = False
        return None, type("R", (), {"beta": np.zeros((m, X.shape[1])), "alpha": np.ones(m)})(), np.ones(m), ok

    monkeypatch.setattr(mc, "_lr_batch", flaky)
    with pytest.raises(ExperimentAborted):
        run_null_rejection(small_cfg())


def test_table_presets():
    assert [lab["p"] for lab, _, _ in table_experiments(1, 100)] == list(range(3, 10))
    t2 = table_experiments(2, 100)
    assert [lab["n"] for lab, _, _ in t2] == [20, 30, 40, 50, 100, 200]
    assert all(cfg.hypothesis == BetaSubset((4, 5)) for _, cfg, _ in t2)
    t4 = table_experiments(4, 100)
    assert len(t4) == 15 and all(kind == "power" for _, _, kind in t4)
    t5 = table_experiments(5, 100)
    assert {(lab["p"], lab["alpha0"]) for lab, _, _ in t5} == {(p, a) for p in (2, 3, 4) for a in (0.5, 1.0)}
    t6 = table_experiments(6, 100)
    assert len(t6) == 10 and all(cfg.bootstrap_B == 600 and cfg.n == 25 for _, cfg, _ in t6)
    t7 = table_experiments(7, 100, bootstrap_B=None)
    assert all(cfg.hypothesis == BetaSubset((1, 3)) and cfg.bootstrap_B is None for _, cfg, _ in t7)
    for bad in (3, 8, 9):
        with pytest.raises(ValueError):
            table_experiments(bad, 100)
    assert len(mc.normal_level_table()) == 15
