"""Deterministic synthetic ETF-like universe.

Daily returns follow per-asset AG processes whose innovations are tied by a
one-factor t copula, so the data has volatility clustering, fat tails and
cross-sectional dependence.  Used for the bundled demo dataset and tests.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dynamic import AGParams, TCopula, copula_uniforms, inverse_transform
from .market_data import PriceSeries

DEFAULT_START = "2010-01-04"


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def default_params(n_assets: int, seed: int = 7) -> list[AGParams]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_assets):
        vol = rng.uniform(0.008, 0.018)  # long-run daily volatility
        a1 = rng.uniform(0.04, 0.10)
        b1 = rng.uniform(0.85, 0.94 - a1 + 0.04)
        b1 = min(b1, 0.985 - a1)
        out.append(AGParams(
            delta0=rng.uniform(0.0001, 0.0006),
            ar1=rng.uniform(-0.08, 0.08),
            ma1=rng.uniform(-0.05, 0.05),
            alpha0=vol * vol * (1.0 - a1 - b1),
            alpha1=a1,
            beta1=b1,
            nu=rng.uniform(4.0, 10.0),
        ))
    return out


def factor_correlation(n_assets: int, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed + 1)
    load = rng.uniform(0.35, 0.85, n_assets)
    corr = np.outer(load, load)
    np.fill_diagonal(corr, 1.0)
    return corr


def simulate_panel_returns(params, corr, n_days: int, seed: int = 0, copula_df: float = 6.0,
                           burn: int = 500) -> np.ndarray:
    """T x N simple returns from copula-linked AG processes."""
    n = len(params)
    U = copula_uniforms(TCopula(np.asarray(corr, dtype=float), copula_df), n_days + burn, seed)
    out = np.empty((n_days + burn, n))
    for j, p in enumerate(params):
        eps = inverse_transform(U[:, j], p.nu)
        s2 = p.alpha0 / (1.0 - p.alpha1 - p.beta1)
        r_prev = p.delta0 / (1.0 - p.ar1)
        a_prev = 0.0
        for t in range(n_days + burn):
            s2 = p.alpha0 + p.alpha1 * a_prev * a_prev + p.beta1 * s2
            a = np.sqrt(s2) * eps[t]
            r = p.delta0 + p.ar1 * r_prev + a + p.ma1 * a_prev
            out[t, j] = r
            r_prev, a_prev = r, a
    return np.maximum(out[burn:], -0.95)


def synthetic_universe(n_assets: int = 10, n_days: int = 3000, seed: int = 2024,
                       start: str = DEFAULT_START) -> list[PriceSeries]:
    """Price series with ``n_days + 1`` closes each (so ``n_days`` returns)."""
    params = default_params(n_assets, seed)
    corr = factor_correlation(n_assets, seed)
    R = simulate_panel_returns(params, corr, n_days, seed)
    dates = business_days(start, n_days + 1)
    series = []
    for j in range(n_assets):
        prices = 50.0 * np.concatenate([[1.0], np.cumprod(1.0 + R[:, j])])
        series.append(PriceSeries(f"SYN{j:02d}", dates, np.round(prices, 6)))
    return series


def synthetic_riskfree(dates, seed: int = 2024) -> np.ndarray:
    """Slowly drifting annual rate in percent, kept in [0, 5]."""
    rng = np.random.default_rng(seed + 2)
    steps = rng.normal(0.0, 0.02, len(dates))
    return np.clip(1.5 + np.cumsum(steps), 0.0, 5.0)


def write_dataset(out_dir, n_assets: int = 10, n_days: int = 3000, seed: int = 2024) -> Path:
    """Price CSVs, a manifest and a risk-free CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = synthetic_universe(n_assets, n_days, seed)
    lines = ["# synthetic universe: copula-linked AG returns", f"# seed {seed}, {n_days} trading days"]
    for s in series:
        name = f"{s.ticker}.csv"
        with (out_dir / name).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "close"])
            for d, p in zip(s.dates, s.prices):
                w.writerow([str(d), f"{p:.6f}"])
        lines.append(f"{s.ticker} = {name}")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    rates = synthetic_riskfree(series[0].dates, seed)
    with (out_dir / "riskfree.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "annual_rate_percent"])
        for d, x in zip(series[0].dates, rates):
            w.writerow([str(d), f"{x:.4f}"])
    return manifest

