"""Performance ratios on daily return series.

All ratios are in daily units.  VaR and CVaR are signed returns (a loss is
negative).  ``rf`` arguments accept a scalar or a series aligned with the
returns.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateBenchmark,
    EmptySeries,
    EmptyTail,
    NoDownside,
    TooFewObservations,
    ZeroDrawdown,
    ZeroTailRisk,
    ZeroVolatility,
)
from .kernels import max_drawdown_path

TRADING_DAYS = 252


@dataclass(frozen=True)
class RatioReport:
    sharpe: float
    sortino: float
    calmar: float
    starr95: float
    rachev: float
    jensens_alpha: float
    max_drawdown: float
    var95: float
    cvar95: float
    var99: float
    cvar99: float
    n_obs: int

    def as_dict(self) -> dict:
        return asdict(self)


def _series(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise EmptySeries("empty series")
    return a


def _excess(returns, rf):
    r = _series(returns)
    rf = np.broadcast_to(np.asarray(rf, dtype=float), r.shape)
    return r - rf


def sharpe(returns, rf=0.0) -> float:
    ex = _excess(returns, rf)
    if ex.size < 2:
        raise TooFewObservations("Sharpe needs at least 2 observations")
    sd = ex.std(ddof=1)
    if not sd > 1e-15 * max(1.0, abs(ex.mean())):
        raise ZeroVolatility("excess returns have zero volatility")
    return float(ex.mean() / sd)


def max_drawdown(prices) -> float:
    p = _series(prices)
    return max_drawdown_path(p)


def cagr(prices, periods_per_year: int = TRADING_DAYS) -> float:
    p = _series(prices)
    years = (len(p) - 1) / periods_per_year
    if years <= 0:
        raise TooFewObservations("CAGR needs at least two prices")
    return float((p[-1] / p[0]) ** (1.0 / years) - 1.0)


def calmar(returns, prices, periods_per_year: int = TRADING_DAYS) -> float:
    """Compound annual growth of ``prices`` divided by their maximum drawdown.

    ``prices`` should include the starting value, so a path covering one
    year of returns has ``periods_per_year + 1`` entries.
    """
    r = _series(returns)
    p = _series(prices)
    if len(p) - 1 < periods_per_year and len(r) < periods_per_year:
        raise TooFewObservations("Calmar needs at least one year of observations")
    mdd = max_drawdown(p)
    if mdd <= 0.0:
        raise ZeroDrawdown("price path never draws down; Calmar is unbounded")
    return cagr(p, periods_per_year) / mdd


def _check_tail(n, confidence):
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    need = math.ceil(1.0 / (1.0 - confidence) - 1e-9)
    if n < need:
        raise TooFewObservations(f"{n} observations; need {need} at confidence {confidence}")


def var(returns, confidence: float = 0.95) -> float:
    """Lower ``1 - confidence`` quantile, linear interpolation between order statistics."""
    r = _series(returns)
    _check_tail(r.size, confidence)
    return float(np.quantile(r, 1.0 - confidence, method="linear"))


def cvar(returns, confidence: float = 0.95) -> float:
    """Average of the worst ``(1 - confidence)`` share of outcomes.

    When ``(1 - confidence) * n`` is fractional the boundary observation is
    counted with that fractional weight (the Rockafellar-Uryasev value), so
    this equals the optimal value of the CVaR linear program for fixed
    weights.
    """
    r = _series(returns)
    _check_tail(r.size, confidence)
    return tail_mean(r, 1.0 - confidence)


def tail_mean(x, share: float) -> float:
    """Mean of the lowest ``share`` fraction of ``x``, boundary point weighted fractionally."""
    x = np.sort(np.asarray(x, dtype=float))
    m = share * x.size
    whole = int(math.floor(m + 1e-9))
    frac = m - whole
    total = x[:whole].sum()
    if frac > 1e-9:
        total += frac * x[whole]
    return float(total / m)


def starr(returns, rf=0.0, confidence: float = 0.95) -> float:
    ex = _excess(returns, rf)
    tail = cvar(_series(returns), confidence)
    if tail == 0.0:
        raise ZeroTailRisk("CVaR is zero")
    return float(ex.mean() / abs(tail))


def rachev(returns, alpha: float = 0.95, beta: float = 0.95) -> float:
    """Expected tail gain over expected tail loss (both positive magnitudes).

    Numerator: mean of the best ``1 - alpha`` share of returns.
    Denominator: |mean of the worst ``1 - beta`` share|.
    """
    r = _series(returns)
    gain = -cvar(-r, alpha)
    loss = abs(cvar(r, beta))
    if loss == 0.0:
        raise EmptyTail("loss tail is empty (zero expected tail loss)")
    return float(gain / loss)


def sortino(returns, rf=0.0) -> float:
    ex = _excess(returns, rf)
    down = np.minimum(ex, 0.0)
    if not np.any(down < 0.0):
        raise NoDownside("no excess return below zero")
    dd = math.sqrt(float(np.mean(down * down)))
    return float(ex.mean() / dd)


def regression_alpha_beta(returns, benchmark, rf=0.0) -> tuple[float, float]:
    y = _excess(returns, rf)
    x = _excess(benchmark, rf)
    if x.shape != y.shape:
        raise ValueError("returns and benchmark must be aligned")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if not sxx > 1e-30 * max(1.0, float(x @ x)):
        raise DegenerateBenchmark("benchmark excess returns have zero variance")
    beta = float(xc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * x.mean())
    return alpha, beta


def jensens_alpha(returns, benchmark, rf=0.0) -> float:
    r = _series(returns)
    if r.size < 30:
        raise TooFewObservations("Jensen's alpha needs at least 30 observations")
    return regression_alpha_beta(r, benchmark, rf)[0]


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except (ArithmeticError, ValueError):
        return float("nan")


def ratio_report(returns, prices, rf=0.0, benchmark=None) -> RatioReport:
    """Every ratio for one strategy; undefined ratios become NaN."""
    r = _series(returns)
    return RatioReport(
        sharpe=_safe(sharpe, r, rf),
        sortino=_safe(sortino, r, rf),
        calmar=_safe(calmar, r, prices),
        starr95=_safe(starr, r, rf, 0.95),
        rachev=_safe(rachev, r),
        jensens_alpha=_safe(jensens_alpha, r, benchmark, rf) if benchmark is not None else float("nan"),
        max_drawdown=_safe(max_drawdown, prices),
        var95=_safe(var, r, 0.95),
        cvar95=_safe(cvar, r, 0.95),
        var99=_safe(var, r, 0.99),
        cvar99=_safe(cvar, r, 0.99),
        n_obs=int(r.size),
    )


METRIC_NAMES = ("sharpe", "sortino", "calmar", "starr95", "rachev", "jensens_alpha",
                "max_drawdown", "var95", "cvar95", "var99", "cvar99", "n_obs")


def write_ratio_csv(path, reports: dict) -> None:
    """Long format: ``portfolio,metric,value``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["portfolio", "metric", "value"])
        for name, rep in reports.items():
            for metric in METRIC_NAMES:
                out.writerow([name, metric, repr(getattr(rep, metric))])
