"""Markowitz mean-variance analytics: frontier, minimum-variance and tangency portfolios."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DegenerateFrontier,
    Infeasible,
    NoTangency,
    SingularCovariance,
    SolverFailure,
    WindowTooShort,
    ZeroRiskPortfolio,
)
from .portfolio import LONG_ONLY, LONG_SHORT, WeightVector
from .qp import solve_qp

log = logging.getLogger(__name__)

DEFAULT_BOX = 1.0  # |w_i| bound applied by the long-short optimizers
KKT_TOL = 1e-10


@dataclass(frozen=True)
class MomentEstimates:
    mean: np.ndarray
    cov: np.ndarray
    tickers: tuple = ()
    jitter: float = 0.0

    def __post_init__(self):
        if not self.tickers:
            object.__setattr__(self, "tickers", tuple(f"A{i}" for i in range(len(self.mean))))

    @property
    def N(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class FrontierCoefficients:
    A: float
    B: float
    C: float
    delta: float

    @property
    def degenerate(self) -> bool:
        return not self.delta > 1e-14 * max(abs(self.A * self.B), self.C * self.C, 1e-300)

    @property
    def gmv_return(self) -> float:
        return self.C / self.B

    def variance_at(self, target):
        return (self.B * np.square(target) - 2.0 * self.C * np.asarray(target) + self.A) / self.delta


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    stdev: float
    weights: WeightVector


@dataclass(frozen=True)
class CapitalMarketLine:
    intercept: float
    slope: float

    def at(self, stdev):
        return self.intercept + self.slope * np.asarray(stdev)

    def sample(self, stdev_max: float, n: int = 100):
        s = np.linspace(0.0, stdev_max, n)
        return s, self.at(s)


def regularize_cov(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrize and add trace-scaled jitter until the matrix is safely PD."""
    cov = 0.5 * (cov + cov.T)
    n = cov.shape[0]
    base = max(np.trace(cov) / n, 1e-12)
    lam = 0.0
    step = 1e-10 * base
    for _ in range(30):
        trial = cov + lam * np.eye(n) if lam else cov
        ev = np.linalg.eigvalsh(trial)
        if ev[0] > 1e-12 * max(ev[-1], 0.0) and ev[0] > 0:
            try:
                np.linalg.cholesky(trial)
                return trial, lam
            except np.linalg.LinAlgError:
                pass
        lam = step if lam == 0.0 else lam * 10.0
    raise SingularCovariance("covariance could not be regularized to positive definite")


def estimate_moments(window, tickers=None) -> MomentEstimates:
    """Sample mean and (T-1)-denominator covariance of a T x N window."""
    X = np.asarray(getattr(window, "returns", window), dtype=float)
    if tickers is None:
        tickers = getattr(window, "tickers", ())
    if X.ndim == 1:
        X = X[:, None]
    T, N = X.shape
    if T < N + 2:
        raise WindowTooShort(f"window has {T} rows; need at least {N + 2} for {N} assets")
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1).reshape(N, N)
    cov, lam = regularize_cov(cov)
    return MomentEstimates(mean, cov, tuple(tickers), lam)


def _solves(m: MomentEstimates):
    try:
        cf = cho_factor(m.cov)
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance is not positive definite") from None
    e = np.ones(m.N)
    return cho_solve(cf, m.mean), cho_solve(cf, e)


def frontier_coefficients(m: MomentEstimates) -> FrontierCoefficients:
    inv_r, inv_e = _solves(m)
    A = float(m.mean @ inv_r)
    B = float(inv_e.sum())
    C = float(m.mean @ inv_e)
    return FrontierCoefficients(A, B, C, A * B - C * C)


def _point(m, w, regime, gross_bound=DEFAULT_BOX) -> FrontierPoint:
    var = float(w @ m.cov @ w)
    return FrontierPoint(float(w @ m.mean), float(np.sqrt(max(var, 0.0))),
                         WeightVector(m.tickers, w, regime, gross_bound))


def solve_unconstrained(m: MomentEstimates, target_return: float,
                        coef: Optional[FrontierCoefficients] = None) -> FrontierPoint:
    """Frontier portfolio with mean ``target_return`` and no sign or box limits.

    The returned weights are tagged long-short with an unlimited gross bound:
    the analytic frontier is a reference curve, not a tradeable allocation.
    """
    coef = coef or frontier_coefficients(m)
    if coef.degenerate:
        raise DegenerateFrontier(f"frontier degenerate (delta={coef.delta:.3e})")
    inv_r, inv_e = _solves(m)
    w1 = (coef.B * inv_r - coef.C * inv_e) / coef.delta
    w2 = (coef.A * inv_e - coef.C * inv_r) / coef.delta
    w = target_return * w1 + w2
    w = w + (1.0 - w.sum()) / len(w)  # strip roundoff; exact in exact arithmetic
    stdev = float(np.sqrt(max(coef.variance_at(target_return), 0.0)))
    return FrontierPoint(float(target_return), stdev, WeightVector(m.tickers, w, LONG_SHORT, np.inf))


def _box_rows(n, bound):
    eye = np.eye(n)
    return np.vstack([eye, -eye]), np.full(2 * n, bound)


def _check_qp(res, what):
    if res.kkt_residual > 1e-6:
        raise SolverFailure(f"{what}: KKT residual too large", iterations=res.iterations,
                            residual=res.kkt_residual)
    return res.x


def min_variance_portfolio(m: MomentEstimates, regime: str = LONG_SHORT,
                           bound: float = DEFAULT_BOX) -> FrontierPoint:
    n = m.N
    e = np.ones(n)
    if regime == LONG_SHORT:
        _, inv_e = _solves(m)
        w = inv_e / inv_e.sum()
        if np.abs(w).max() <= bound:
            return _point(m, w, LONG_SHORT, max(bound, DEFAULT_BOX))
        G, h = _box_rows(n, bound)
        x0 = e / n
    elif regime == LONG_ONLY:
        G, h = -np.eye(n), np.zeros(n)
        x0 = e / n
    else:
        raise ValueError(f"unknown regime {regime!r}")
    res = solve_qp(m.cov, np.zeros(n), e[None, :], [1.0], G, h, x0=x0, tol=KKT_TOL)
    w = _check_qp(res, "minimum-variance QP")
    w = _clean(w, regime)
    return _point(m, w, regime, max(bound, DEFAULT_BOX))


def _clean(w, regime):
    if regime == LONG_ONLY:
        w = np.where(w < 0.0, 0.0, w)
    return w / w.sum()


def tangency_portfolio(m: MomentEstimates, rf_daily: float = 0.0, regime: str = LONG_SHORT,
                       bound: float = DEFAULT_BOX) -> FrontierPoint:
    """Maximum-Sharpe portfolio.

    The ratio is maximized through its homogenized form: minimize y'Σy subject
    to (μ - rf)'y = 1 plus the regime constraints scaled by sum(y), then
    normalize y to unit sum.  One convex QP gives the exact optimum.
    """
    n = m.N
    excess = m.mean - rf_daily
    if not np.any(excess > 0):
        raise NoTangency("no asset has mean return above the risk-free rate")
    e = np.ones(n)
    if regime == LONG_SHORT:
        inv_r, inv_e = _solves(m)
        z = inv_r - rf_daily * inv_e
        s = z.sum()
        if s > 0:
            w = z / s
            if np.abs(w).max() <= bound:
                return _point(m, w, LONG_SHORT, max(bound, DEFAULT_BOX))
        if not np.isfinite(bound):
            raise NoTangency("unbounded long-short tangency has a non-positive budget")
        # |y_i| <= bound * sum(y)
        G = np.vstack([np.eye(n) - bound, -np.eye(n) - bound])
        h = np.zeros(2 * n)
    elif regime == LONG_ONLY:
        G, h = -np.eye(n), np.zeros(n)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    j = int(np.argmax(excess))
    y0 = np.zeros(n)
    y0[j] = 1.0 / excess[j]
    res = solve_qp(m.cov, np.zeros(n), excess[None, :], [1.0], G, h, x0=y0, tol=KKT_TOL)
    y = _check_qp(res, "tangency QP")
    if regime == LONG_ONLY:
        y = np.where(y < 0.0, 0.0, y)
    if not y.sum() > 0:
        raise SolverFailure("tangency QP returned a non-positive budget")
    return _point(m, y / y.sum(), regime, max(bound, DEFAULT_BOX))


def sharpe_of(m: MomentEstimates, w, rf_daily: float = 0.0) -> float:
    w = np.asarray(getattr(w, "weights", w))
    return float((w @ m.mean - rf_daily) / np.sqrt(w @ m.cov @ w))


def constrained_frontier_point(m: MomentEstimates, target_return: float, regime: str = LONG_ONLY,
                               bound: float = DEFAULT_BOX) -> FrontierPoint:
    """Minimum-variance portfolio at a given mean under the regime's constraints."""
    n = m.N
    e = np.ones(n)
    A = np.vstack([e, m.mean])
    b = np.array([1.0, target_return])
    if regime == LONG_ONLY:
        G, h = -np.eye(n), np.zeros(n)
    else:
        G, h = _box_rows(n, bound)
    res = solve_qp(m.cov, np.zeros(n), A, b, G, h, tol=KKT_TOL)
    w = _check_qp(res, "frontier QP")
    if regime == LONG_ONLY:
        w = np.where(w < 0.0, 0.0, w)
    return _point(m, w, regime, max(bound, DEFAULT_BOX))


def frontier_curve(m: MomentEstimates, n_points: int = 50, regime: str = LONG_SHORT,
                   bound: float = DEFAULT_BOX) -> list[FrontierPoint]:
    """Frontier points at evenly spaced target means above the minimum-variance vertex.

    Long-short points follow the unconstrained analytic frontier; long-only
    points solve the QP with ``w >= 0``.  Infeasible targets are skipped and
    logged.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    top = float(m.mean.max())
    if regime == LONG_SHORT:
        coef = frontier_coefficients(m)
        start = coef.gmv_return
        targets = np.linspace(start, start + 4.0 * (top - start), n_points)
        return [solve_unconstrained(m, t, coef) for t in targets]
    start = min_variance_portfolio(m, LONG_ONLY).target_return
    targets = np.linspace(start, top, n_points)
    points = []
    for t in targets:
        try:
            points.append(constrained_frontier_point(m, t, LONG_ONLY, bound))
        except (Infeasible, SolverFailure) as exc:
            log.warning("frontier target %.6g skipped: %s", t, exc)
    return points


def capital_market_line(tangency: FrontierPoint, rf_daily: float = 0.0) -> CapitalMarketLine:
    if not tangency.stdev > 0:
        raise ZeroRiskPortfolio("tangency portfolio has zero volatility")
    return CapitalMarketLine(rf_daily, (tangency.target_return - rf_daily) / tangency.stdev)


def write_frontier_csv(path, points: list[FrontierPoint]) -> None:
    if not points:
        Path(path).write_text("target_return,stdev\n", encoding="utf-8")
        return
    tickers = points[0].weights.tickers
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["target_return", "stdev", *tickers])
        for p in points:
            out.writerow([repr(p.target_return), repr(p.stdev), *(repr(float(x)) for x in p.weights.weights)])


def write_cml_csv(path, line: CapitalMarketLine, stdev_max: float, n: int = 100) -> None:
    s, r = line.sample(stdev_max, n)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["stdev", "return"])
        for a, b in zip(s, r):
            out.writerow([repr(float(a)), repr(float(b))])
