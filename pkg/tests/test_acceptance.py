"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (section "acceptance
criteria").  Tolerances are the stated ones; nothing here is loosened to
make a criterion pass.
"""
import math
import os
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import make_panel, random_moments
from etfopt import metrics as M
from etfopt.backtest import BacktestConfig, run_backtest, write_results
from etfopt.cli import main, read_ratios
from etfopt.cvar import CvarProblem, max_starr, min_cvar, tail_loss
from etfopt.dynamic import AGParams, TCopula, copula_uniforms, fit_ag, fit_copula, simulate_ag
from etfopt.market_data import cumulative_price
from etfopt.mean_variance import (
    MomentEstimates,
    frontier_coefficients,
    frontier_curve,
    sharpe_of,
    tangency_portfolio,
)
from etfopt.portfolio import ALL_LABELS, LONG_ONLY, LONG_SHORT
from etfopt.reference import EWP_MDD, EWP_MDD_TOL, sharpe_ranking_matches
from etfopt.robust import huber_fit
from etfopt.tail import hill_estimates


def record(n, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def skip_record(n, detail):
    conftest.ACCEPTANCE_LINES.append(f"criterion {n}: SKIPPED  {detail}")
    pytest.skip(detail)


def random_box(rng, n, count, bound=1.0):
    out = np.empty((0, n))
    while len(out) < count:
        w = rng.uniform(-bound, bound, (count, n - 1))
        w = np.column_stack([w, 1.0 - w.sum(axis=1)])
        out = np.vstack([out, w[np.abs(w[:, -1]) <= bound]])
    return out[:count]


def column_tail_loss(P, confidence):
    """tail_loss for every column of P at once."""
    S = P.shape[0]
    m = (1.0 - confidence) * S
    whole = int(math.floor(m + 1e-9))
    frac = m - whole
    X = np.sort(P, axis=0)
    total = X[:whole].sum(axis=0) + (frac * X[whole] if frac > 1e-9 else 0.0)
    return -total / m


# 1 ------------------------------------------------------------------------------

def test_criterion_1_frontier_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    count = 0
    for i in range(100):
        n = 2 + i % 7
        mean, cov = random_moments(rng, n)
        m = MomentEstimates(mean, cov)
        c = frontier_coefficients(m)
        for p in frontier_curve(m, 50, LONG_SHORT):
            w = p.weights.weights
            achieved = w @ cov @ w
            formula = (c.B * p.target_return**2 - 2 * c.C * p.target_return + c.A) / c.delta
            worst = max(worst, abs(achieved - formula) / max(abs(formula), 1e-300))
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    record(1, ok, f"{count} frontier points, worst relative error {worst:.2e} (<=1e-9), {elapsed:.2f}s (<5s)")
    assert ok


# 2 ------------------------------------------------------------------------------

def test_criterion_2_optimizer_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    # (a) min-CVaR LP versus exhaustive grid at step 0.02
    R = 0.0004 + 0.01 * rng.standard_t(4, (200, 3)) / np.sqrt(2.0) + np.array([0.0, 0.0002, 0.0004])
    lp = min_cvar(CvarProblem(R, 0.95)).cvar
    steps = np.round(np.arange(0.0, 1.0 + 1e-9, 0.02), 10)
    grid = np.array([(a, b, 1.0 - a - b) for a in steps for b in steps if a + b <= 1.0 + 1e-12])
    grid = np.clip(grid, 0.0, None)
    grid_best = column_tail_loss(R @ grid.T, 0.95).min()
    gap = grid_best - lp
    grid_ok = abs(gap) <= 1e-6

    # (b) tangency Sharpe and max-STARR versus 10,000 random feasible portfolios
    dominated = True
    n_inst = 0
    for k in range(6):
        regime = (LONG_ONLY, LONG_SHORT)[k % 2]
        n = 3 + k % 3
        mean, cov = random_moments(rng, n)
        mean = np.abs(mean)
        m = MomentEstimates(mean, cov)
        W = rng.dirichlet(np.ones(n), 10_000) if regime == LONG_ONLY else random_box(rng, n, 10_000)
        sr = (W @ mean - 1e-5) / np.sqrt(np.einsum("ij,jk,ik->i", W, cov, W))
        best = sharpe_of(m, tangency_portfolio(m, 1e-5, regime).weights, 1e-5)
        dominated &= bool(best >= sr.max() - 1e-12)
        S = 0.0005 + rng.standard_t(4, (200, n)) * 0.01 + np.linspace(0, 0.0006, n)
        for conf in (0.95, 0.99):
            p = CvarProblem(S, conf, 1e-5, regime)
            sol = max_starr(p)
            P = S @ W.T
            ratios = (P.mean(axis=0) - 1e-5) / column_tail_loss(P, conf)
            dominated &= bool(sol.ratio >= np.max(ratios[np.isfinite(ratios)]) - 1e-12)
        n_inst += 3
    elapsed = time.perf_counter() - t0
    ok = grid_ok and dominated and elapsed < 60.0
    record(2, ok, f"LP CVaR {lp:.8f} vs grid best {grid_best:.8f} (gap {gap:.2e}, need <=1e-6; "
                  f"LP {'<=' if gap >= -1e-12 else '>'} grid); dominance on {n_inst} instances: "
                  f"{'yes' if dominated else 'NO'}; {elapsed:.1f}s (<60s)")
    assert ok


# 3 ------------------------------------------------------------------------------

def test_criterion_3_estimator_recovery():
    t0 = time.perf_counter()
    # (a) Hill on Pareto(3)
    x = np.random.default_rng(303).uniform(size=10_000) ** (-1.0 / 3.0)
    c = hill_estimates(x, 500)
    sel = (c.k_values >= 50) & (c.k_values <= 500)
    hill_mean = c.hill[sel].mean()
    cover = np.mean((c.ci_low[sel] <= 3.0) & (3.0 <= c.ci_high[sel]))
    a_ok = abs(hill_mean - 3.0) <= 0.15 and cover >= 0.90

    # (b) AG recovery
    true = AGParams(0.0, 0.1, -0.05, 1e-6, 0.08, 0.90, 6.0)
    r = simulate_ag(true, 4000, seed=0)
    fit = fit_ag(r).params
    names = ("delta0", "ar1", "ma1", "alpha0", "alpha1", "beta1", "nu")
    misses = []
    for name, est, tv in zip(names, fit.as_tuple(), true.as_tuple()):
        if abs(est - tv) > max(0.25 * abs(tv), 0.02):
            misses.append(f"{name}={est:.4g} (true {tv:g})")
    b_ok = not misses and 4.0 <= fit.nu <= 9.0

    # (c) t-copula recovery
    corr = np.array([[1.0, 0.6], [0.6, 1.0]])
    cop = fit_copula(copula_uniforms(TCopula(corr, 5.0), 10_000, seed=303))
    rho = cop.corr[0, 1]
    c_ok = abs(rho - 0.6) <= 0.05 and 3.5 <= cop.df <= 8.0

    elapsed = time.perf_counter() - t0
    ok = a_ok and b_ok and c_ok and elapsed < 300
    record(3, ok, f"(a) Hill mean {hill_mean:.3f}, band coverage {cover:.0%} [{'ok' if a_ok else 'fail'}]; "
                  f"(b) AG {'all parameters in tolerance' if b_ok else 'outside tolerance: ' + ', '.join(misses)}; "
                  f"(c) rho {rho:.3f}, df {cop.df:.2f} [{'ok' if c_ok else 'fail'}]; {elapsed:.0f}s (<300s)")
    assert ok


# 4 ------------------------------------------------------------------------------

def test_criterion_4_tail_ordering():
    rng = np.random.default_rng(404)
    violations = 0
    for i in range(1000):
        n = int(rng.integers(100, 2500))
        kind = i % 4
        if kind == 0:
            r = rng.normal(0.0003, 0.01, n)
        elif kind == 1:
            r = rng.standard_t(rng.uniform(2.1, 8), n) * 0.01
        elif kind == 2:
            r = rng.lognormal(-5, 1, n) - 0.01
        else:
            r = np.round(rng.normal(0, 0.01, n), 3)  # heavy ties
        prices = 100 * np.concatenate([[1.0], np.cumprod(1 + np.maximum(r, -0.99))])
        v95, v99, c95, c99 = M.var(r, 0.95), M.var(r, 0.99), M.cvar(r, 0.95), M.cvar(r, 0.99)
        mdd = M.max_drawdown(prices)
        violations += (c95 > v95) + (c99 > v99) + (c99 > c95) + (not 0.0 <= mdd <= 1.0)
    ok = violations == 0
    record(4, ok, f"1000 random series, {violations} violations")
    assert ok


# 5 ------------------------------------------------------------------------------

def test_criterion_5_robust_regression():
    wins = 0
    for trial in range(100):
        g = np.random.default_rng(5000 + trial)
        x = g.normal(0.0003, 0.01, 2000)
        y = 0.0001 + 1.2 * x + g.normal(0, 0.001, 2000)
        idx = g.choice(2000, 100, replace=False)
        y[idx] = 10.0
        b_ols = np.polyfit(x, y, 1)[0]
        wins += abs(huber_fit(y, x).beta - 1.2) < abs(b_ols - 1.2)
    g = np.random.default_rng(505)
    x = g.normal(0.0003, 0.01, 10_000)
    y = 0.0001 + 1.2 * x + g.normal(0, 0.001, 10_000)
    f = huber_fit(y, x)
    b, a = np.polyfit(x, y, 1)
    diff = max(abs(f.beta - b), abs(f.alpha - a))
    ok = wins >= 95 and diff <= 1e-3
    record(5, ok, f"Huber beats OLS in {wins}/100 contaminated trials (>=95); clean-data gap {diff:.1e} (<=1e-3)")
    assert ok


# 6 ------------------------------------------------------------------------------

def _factor_panel(T, N, seed):
    g = np.random.default_rng(seed)
    f = g.standard_t(5, T) * 0.008
    X = 0.0004 + f[:, None] * g.uniform(0.5, 1.5, N) + g.standard_t(5, (T, N)) * 0.006
    return X


def _lookahead_ok(X, cfg, day):
    base = run_backtest(make_panel(X), None, cfg)
    Y = X.copy()
    Y[cfg.window_length + day] += 0.07 * np.sign(np.arange(X.shape[1]) % 2 - 0.5)
    moved = run_backtest(make_panel(Y), None, cfg)
    return all(np.array_equal(a.weights[:day + 1], b.weights[:day + 1]) for a, b in zip(base, moved)), base


def test_criterion_6_backtest_integrity(tmp_path):
    X = _factor_panel(240, 4, 606)
    hist_cfg = BacktestConfig(window_length=200)
    hist_ok, base = _lookahead_ok(X, hist_cfg, 15)
    dyn_cfg = BacktestConfig(window_length=500, mode="dynamic", scenario_count=1000, seed=6,
                             strategies=("LO_MVP", "LS_TVP", "LO_C95", "LS_TC99"))
    dyn_ok, _ = _lookahead_ok(_factor_panel(506, 3, 607), dyn_cfg, 2)

    for d in ("a", "b"):
        write_results(tmp_path / d, run_backtest(make_panel(X), None, hist_cfg))
    same = all((tmp_path / "a" / p.name).read_bytes() == p.read_bytes() for p in (tmp_path / "b").iterdir())

    ewp = base[0]
    assert ewp.label == "EWP"
    expected = cumulative_price(make_panel(X[200:]), np.full((40, 4), 0.25))
    ewp_err = float(np.abs(ewp.prices - expected).max())
    ok = hist_ok and dyn_ok and same and ewp_err <= 1e-10
    record(6, ok, f"no look-ahead historical={hist_ok} dynamic={dyn_ok}; bytewise rerun={same}; "
                  f"EWP max deviation {ewp_err:.1e} (<=1e-10)")
    assert ok


# 7 ------------------------------------------------------------------------------

def test_criterion_7_paper_reproduction(tmp_path, capsys):
    cfg = os.environ.get("ETFOPT_SNAPSHOT_CONFIG")
    if not cfg:
        skip_record(7, "needs the original 30-ETF price snapshot; set ETFOPT_SNAPSHOT_CONFIG to its config file")
    out = tmp_path / "snapshot"
    for cmd in (["ingest"], ["backtest", "--mode", "historical"], ["report"]):
        assert main(["--config", cfg, "--out", str(out), *cmd]) == 0
    table = read_ratios(out / "historical" / "ratios.csv")
    ranking = sharpe_ranking_matches(table)
    mdd = table["EWP"]["max_drawdown"]
    ok = ranking and abs(mdd - EWP_MDD) <= EWP_MDD_TOL
    cells = (out / "report" / "reference_check.csv").read_text().splitlines()[1:]
    n_pass = sum(line.endswith(",pass") for line in cells)
    record(7, ok, f"Sharpe ranking {'matches' if ranking else 'differs'}; EWP MDD {mdd:.4f} "
                  f"(target {EWP_MDD} +/- {EWP_MDD_TOL}); {n_pass}/{len(cells)} table cells within 10%")
    assert ok


# 8 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_dynamic_vs_historical(tmp_path):
    ini = str(resources.files("etfopt") / "data" / "configs" / "synthetic.ini")
    out = tmp_path / "demo"
    t0 = time.perf_counter()
    codes = [main(["--config", ini, "--out", str(out), *cmd])
             for cmd in (["ingest"], ["backtest", "--mode", "dynamic"], ["backtest", "--mode", "historical"])]
    elapsed = time.perf_counter() - t0
    path = out / "historical_vs_dynamic.csv"
    rows = path.read_text().splitlines() if path.exists() else []
    header_ok = bool(rows) and rows[0] == "metric,strategy,historical,dynamic"
    seen = {tuple(r.split(",")[:2]) for r in rows[1:]}
    wanted = {(m, s) for m in ("sharpe", "calmar", "starr95") for s in ALL_LABELS}
    finite = all(math.isfinite(float(v)) for r in rows[1:] for v in r.split(",")[2:])
    ok = codes == [0, 0, 0] and header_ok and wanted <= seen and finite and elapsed < 1800
    record(8, ok, f"exit codes {codes}; {len(wanted & seen)}/{len(wanted)} metric-strategy rows "
                  f"({'finite' if finite else 'non-finite values'}); pair runtime {elapsed / 60:.1f} min (<30)")
    assert ok
