"""Huber M-estimation of ``y = alpha + beta * x`` by iteratively reweighted least squares."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateX, NoConvergence

HUBER_C = 1.345
MAD_SCALE = 1.4826
Z95 = 1.959963984540054


@dataclass(frozen=True)
class RobustFit:
    alpha: float
    beta: float
    se_alpha: float
    se_beta: float
    ci95_alpha: tuple
    ci95_beta: tuple
    n_obs: int
    scale: float
    iterations: int = 0
    converged: bool = True
    ticker: str = ""
    benchmark: str = ""


def _mad(resid):
    return MAD_SCALE * float(np.median(np.abs(resid - np.median(resid))))


def _wls(X, y, w):
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return coef


def huber_fit(y, x, tuning: float = HUBER_C, tol: float = 1e-10, max_iter: int = 200) -> RobustFit:
    """Huber regression of ``y`` on ``x`` with MAD scale re-estimated each pass.

    Standard errors use the sandwich form ``s^2 (X'DX)^-1 (X'Ψ²X) (X'DX)^-1``
    with a ``n/(n-2)`` small-sample factor; CIs are estimate ± 1.96 se.
    Raises :class:`NoConvergence` carrying the last iterate when the
    coefficient change never drops below ``tol``.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    n = y.size
    if x.size != n:
        raise ValueError("x and y must have the same length")
    if n < 3:
        raise ValueError("need at least 3 observations")
    if not np.ptp(x) > 0:
        raise DegenerateX("regressor has zero variance")
    X = np.column_stack([np.ones(n), x])

    coef = _wls(X, y, np.ones(n))
    scale = _mad(y - X @ coef)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        resid = y - X @ coef
        scale = _mad(resid)
        if scale <= 1e-300:
            # zero robust scale: the bulk of the data lies on the current line
            converged = True
            break
        u = np.abs(resid) / scale
        w = np.where(u <= tuning, 1.0, tuning / np.maximum(u, 1e-300))
        new = _wls(X, y, w)
        step = np.abs(new - coef).max()
        coef = new
        if step < tol * max(1.0, np.abs(coef).max()):
            converged = True
            scale = _mad(y - X @ coef)
            break

    resid = y - X @ coef
    if scale > 1e-300:
        u = resid / scale
        psi = np.clip(u, -tuning, tuning)
        dpsi = (np.abs(u) <= tuning).astype(float)
        bread = X.T @ (X * dpsi[:, None])
        if np.linalg.matrix_rank(bread) < 2:
            bread = X.T @ X
        meat = X.T @ (X * (psi * psi)[:, None])
        binv = np.linalg.inv(bread)
        cov = scale * scale * (binv @ meat @ binv) * n / (n - 2)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    else:
        se = np.zeros(2)

    a, b = float(coef[0]), float(coef[1])
    fit = RobustFit(
        alpha=a,
        beta=b,
        se_alpha=float(se[0]),
        se_beta=float(se[1]),
        ci95_alpha=(a - Z95 * se[0], a + Z95 * se[0]),
        ci95_beta=(b - Z95 * se[1], b + Z95 * se[1]),
        n_obs=n,
        scale=float(scale),
        iterations=it,
        converged=converged,
    )
    if not converged:
        raise NoConvergence(f"Huber IRLS did not converge in {max_iter} iterations", result=fit)
    return fit


def benchmark_panel_fit(panel, benchmark, tuning: float = HUBER_C, benchmark_name: str = "") -> list[RobustFit]:
    """One Huber fit per panel column against ``benchmark``; column order kept."""
    X = np.asarray(getattr(panel, "returns", panel), dtype=float)
    tickers = getattr(panel, "tickers", tuple(f"A{i}" for i in range(X.shape[1])))
    bench = np.asarray(benchmark, dtype=float).ravel()
    if bench.size != X.shape[0]:
        raise ValueError("benchmark is not aligned with the panel")
    fits = []
    for j, t in enumerate(tickers):
        try:
            fit = huber_fit(X[:, j], bench, tuning)
        except NoConvergence as exc:
            fit = exc.result
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise type(exc)(f"{t} vs {benchmark_name or 'benchmark'}: {exc}") from exc
        fits.append(_label(fit, t, benchmark_name))
    return fits


def _label(fit, ticker, benchmark):
    return RobustFit(**{**fit.__dict__, "ticker": ticker, "benchmark": benchmark})


def write_fits_csv(path, fits: list[RobustFit]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["ticker", "benchmark", "alpha", "beta", "alpha_lo", "alpha_hi", "beta_lo", "beta_hi"])
        for f in fits:
            out.writerow([f.ticker, f.benchmark, repr(f.alpha), repr(f.beta),
                          repr(float(f.ci95_alpha[0])), repr(float(f.ci95_alpha[1])),
                          repr(float(f.ci95_beta[0])), repr(float(f.ci95_beta[1]))])
