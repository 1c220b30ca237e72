"""Rolling-window backtests with daily rebalancing.

On every out-of-sample day ``t`` the optimizers see only rows
``[t - window, t - 1]`` and the risk-free rate observed on day ``t - 1``.
Historical mode feeds those rows straight to the optimizers; dynamic mode
fits the AG + t-copula model to them and optimizes on simulated next-day
scenarios instead.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import cvar as cv
from . import dynamic as dyn
from . import mean_variance as mv
from .errors import DateAxisMismatch, EtfoptError, WindowFailure, ZeroAssets, origin_module
from .kernels import compound
from .market_data import ReturnPanel, RiskFreeSeries, align_riskfree
from .metrics import RatioReport, ratio_report
from .portfolio import (
    ALL_LABELS,
    CVAR_MIN,
    CVAR_TANGENT,
    EWP,
    MVP,
    TVP,
    StrategySpec,
    WeightVector,
    equal_weights,
    write_weights_csv,
)

log = logging.getLogger(__name__)

HISTORICAL = "historical"
DYNAMIC = "dynamic"
MODES = (HISTORICAL, DYNAMIC)


@dataclass(frozen=True)
class BacktestConfig:
    window_length: int = 1008
    strategies: tuple = tuple(StrategySpec.parse(s) for s in ALL_LABELS)
    mode: str = HISTORICAL
    scenario_count: int = dyn.DEFAULT_SCENARIOS
    seed: int = 0
    rebalance: str = "daily"
    refit_every: int = 1  # dynamic mode: days between AG/copula re-estimation
    ag_starts: int = 8  # simplex starts for the first AG fit of each asset
    warm_starts: int = 1  # starts for later fits, seeded by the previous estimate
    ls_bound: float = mv.DEFAULT_BOX
    initial: float = 100.0
    threads: int = 1
    lp_backend: str = "highs"  # "highs" keeps warm LP models per strategy; "scipy" solves each LP afresh

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(
            s if isinstance(s, StrategySpec) else StrategySpec.parse(s) for s in self.strategies))
        if self.window_length < 100:
            raise ValueError("window_length must be at least 100")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.rebalance != "daily":
            raise ValueError("only daily rebalancing is supported")
        if self.refit_every < 1:
            raise ValueError("refit_every must be at least 1")
        if self.lp_backend not in ("highs", "scipy"):
            raise ValueError("lp_backend must be 'highs' or 'scipy'")
        if self.mode == DYNAMIC and self.scenario_count < 1000:
            raise ValueError("dynamic mode needs at least 1000 scenarios")


@dataclass(frozen=True)
class WarningEvent:
    date: object
    strategy: str
    message: str


@dataclass
class BacktestResult:
    strategy: StrategySpec
    tickers: tuple
    dates: np.ndarray
    weights: np.ndarray  # (days, N)
    returns: np.ndarray
    prices: np.ndarray  # value after each day's return
    initial: float = 100.0
    warnings: list = field(default_factory=list)

    @property
    def label(self) -> str:
        return self.strategy.label

    def weight_vector(self, i: int) -> WeightVector:
        return WeightVector(self.tickers, self.weights[i], self.strategy.regime, np.inf)

    def price_path(self) -> np.ndarray:
        """Prices with the initial investment prepended."""
        return np.concatenate([[self.initial], self.prices])


# -- per-day optimization ---------------------------------------------------------

@dataclass
class _DayInputs:
    moments: Optional[mv.MomentEstimates]
    scenarios: np.ndarray
    rf: float
    tickers: tuple


def _make_backend(kind: str, spec: StrategySpec):
    if kind != "highs" or spec.family not in (CVAR_MIN, CVAR_TANGENT):
        return None
    try:
        return cv.HighsBackend()
    except ImportError:
        log.info("highspy unavailable; CVaR LPs fall back to scipy")
        return None


def _optimize(spec: StrategySpec, day: _DayInputs, bound: float, backend=None) -> np.ndarray:
    n = len(day.tickers)
    if spec.family == EWP:
        return equal_weights(n, day.tickers).weights
    if spec.family == MVP:
        return mv.min_variance_portfolio(day.moments, spec.regime, bound).weights.weights
    if spec.family == TVP:
        return mv.tangency_portfolio(day.moments, day.rf, spec.regime, bound).weights.weights
    prob = cv.CvarProblem(day.scenarios, spec.confidence, day.rf, spec.regime, bound, day.tickers)
    if spec.family == CVAR_MIN:
        return cv.min_cvar_portfolio(prob, backend).weights
    if spec.family == CVAR_TANGENT:
        return cv.max_starr_portfolio(prob, backend).weights
    raise ValueError(f"unsupported strategy {spec}")


class _DynamicModel:
    """Holds AG and copula estimates between re-estimation days."""

    def __init__(self, config: BacktestConfig, n: int):
        self.config = config
        self.params: list = [None] * n
        self.copula = None
        self.fitted_on = None

    def _fit_asset(self, args):
        j, col, refit = args
        prev = self.params[j]
        if prev is not None and not refit:
            try:
                return dyn.filter_ag(prev, col)
            except EtfoptError:
                pass
        if prev is None:
            return dyn.fit_ag(col, n_starts=self.config.ag_starts, seed=self.config.seed + j)
        try:
            return dyn.fit_ag(col, n_starts=self.config.warm_starts, start=prev, seed=self.config.seed + j)
        except EtfoptError:
            return dyn.filter_ag(prev, col)

    def scenarios(self, window: np.ndarray, day_index: int, pool) -> np.ndarray:
        refit = self.fitted_on is None or (day_index - self.fitted_on) >= self.config.refit_every
        jobs = [(j, window[:, j], refit) for j in range(window.shape[1])]
        states = list(pool.map(self._fit_asset, jobs)) if pool else [self._fit_asset(a) for a in jobs]
        self.params = [s.params for s in states]
        if refit or self.copula is None:
            U = np.column_stack([dyn.copula_transform(s) for s in states])
            self.copula = dyn.fit_copula(U[1:], min_obs=min(dyn.MIN_OBS, U.shape[0] - 1))
            self.fitted_on = day_index
        seed = day_seed(self.config.seed, day_index)
        return dyn.simulate_scenarios(self.copula, states, self.config.scenario_count, seed).draws


def day_seed(seed: int, day_index: int) -> int:
    """Per-day simulation seed; independent of run length and thread count."""
    return int(np.random.SeedSequence([int(seed), int(day_index)]).generate_state(1, np.uint64)[0])


def run_backtest(panel: ReturnPanel, rf: Optional[RiskFreeSeries], config: BacktestConfig,
                 progress=None) -> list[BacktestResult]:
    """Daily-rebalanced rolling-window backtest of every configured strategy.

    A day on which a strategy's optimizer fails keeps that strategy's previous
    weights (equal weights on the first day) and records a :class:`WarningEvent`.
    Any other error aborts the run as :class:`WindowFailure` naming the module
    and the last date of the offending window.
    """
    if panel.N < 1:
        raise ZeroAssets("empty panel")
    W = config.window_length
    if panel.T <= W:
        raise ValueError(f"panel has {panel.T} rows; need more than the {W}-day window")
    R = panel.simple()
    rf_daily = align_riskfree(panel, rf).daily_rate if rf is not None else np.zeros(panel.T)
    specs = config.strategies
    n_out = panel.T - W
    weights = np.empty((len(specs), n_out, panel.N))
    warnings: list[list] = [[] for _ in specs]
    need_opt = any(s.family != EWP for s in specs)
    needs_cvar = any(s.family in (CVAR_MIN, CVAR_TANGENT) for s in specs)
    model = _DynamicModel(config, panel.N) if config.mode == DYNAMIC else None
    backends = [_make_backend(config.lp_backend, s) for s in specs]
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def day_inputs(i, t):
        window = R[t - W:t]
        try:
            scen = model.scenarios(window, i, pool) if model is not None else window
            moments = mv.estimate_moments(scen, panel.tickers)
        except (EtfoptError, np.linalg.LinAlgError) as exc:
            log.warning("%s: model inputs failed (%s)", panel.dates[t], exc)
            return None, f"inputs unavailable: {type(exc).__name__}: {exc}"
        return _DayInputs(moments, scen if needs_cvar else None, float(rf_daily[t - 1]), panel.tickers), ""

    def solve(k, day, reason):
        spec = specs[k]
        if spec.family == EWP:
            return np.full(panel.N, 1.0 / panel.N), None
        if day is None:
            return None, reason
        try:
            return _optimize(spec, day, config.ls_bound, backends[k]), None
        except (EtfoptError, np.linalg.LinAlgError, ValueError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    try:
        for i, t in enumerate(range(W, panel.T)):
            try:
                day, reason = day_inputs(i, t) if need_opt else (None, "")
                jobs = range(len(specs))
                outs = list(pool.map(lambda k: solve(k, day, reason), jobs)) if pool else \
                    [solve(k, day, reason) for k in jobs]
            except Exception as exc:
                raise WindowFailure(origin_module(exc), panel.dates[t - 1], exc) from exc
            for k, (w, err) in enumerate(outs):
                if w is None:
                    w = weights[k, i - 1] if i > 0 else np.full(panel.N, 1.0 / panel.N)
                    warnings[k].append(WarningEvent(panel.dates[t], specs[k].label, err))
                weights[k, i] = w
            if progress is not None:
                progress(i + 1, n_out)
    finally:
        if pool is not None:
            pool.shutdown()

    dates = panel.dates[W:]
    out_R = R[W:]
    results = []
    for k, spec in enumerate(specs):
        port = np.einsum("tn,tn->t", weights[k], out_R)
        prices = compound(port, config.initial)
        results.append(BacktestResult(spec, panel.tickers, dates.copy(), weights[k], port, prices,
                                      config.initial, warnings[k]))
    return results


def warning_count(results: Sequence[BacktestResult]) -> int:
    return sum(len(r.warnings) for r in results)


# -- comparison -------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    strategy: str
    report: RatioReport
    terminal_price: float


def compare_to_benchmark(results: Sequence[BacktestResult], benchmark: BacktestResult,
                         rf=None) -> list[ComparisonRow]:
    """Ratio report and terminal price per strategy; Jensen's alpha is against ``benchmark``.

    ``rf`` is a scalar or a daily series on the shared date axis.
    """
    rows = []
    rf_ = 0.0 if rf is None else np.asarray(getattr(rf, "daily_rate", rf), dtype=float)
    for res in [benchmark, *results]:
        if res.dates.shape != benchmark.dates.shape or np.any(res.dates != benchmark.dates):
            raise DateAxisMismatch(f"{res.label} does not share the benchmark's date axis")
    seen = set()
    for res in [benchmark, *results]:
        if res.label in seen:
            continue
        seen.add(res.label)
        rep = ratio_report(res.returns, res.price_path(), rf_, benchmark.returns)
        rows.append(ComparisonRow(res.label, rep, float(res.prices[-1])))
    return rows


# -- output -----------------------------------------------------------------------

def write_result_csv(path, result: BacktestResult) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["strategy", "date", "return", "price"])
        for d, r, p in zip(result.dates, result.returns, result.prices):
            out.writerow([result.label, str(d), repr(float(r)), repr(float(p))])


def write_results(out_dir, results: Sequence[BacktestResult]) -> list[Path]:
    """One returns file and one weight audit file per strategy."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        p = out_dir / f"returns_{res.label}.csv"
        write_result_csv(p, res)
        q = out_dir / f"weights_{res.label}.csv"
        write_weights_csv(q, res.dates, (_AuditRow(res.tickers, w) for w in res.weights))
        written += [p, q]
    return written


@dataclass(frozen=True)
class _AuditRow:
    tickers: tuple
    weights: np.ndarray


def read_result_csv(path) -> tuple[str, np.ndarray, np.ndarray, np.ndarray]:
    labels, dates, rets, prices = [], [], [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            labels.append(rec["strategy"])
            dates.append(rec["date"])
            rets.append(float(rec["return"]))
            prices.append(float(rec["price"]))
    return (labels[0] if labels else ""), np.array(dates, dtype="datetime64[D]"), np.array(rets), np.array(prices)
