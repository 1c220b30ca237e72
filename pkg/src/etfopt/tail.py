"""Hill tail-index curves with Wald confidence bands."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import InsufficientTail, NonPositiveTailValue


@dataclass(frozen=True)
class HillCurve:
    k_values: np.ndarray
    hill: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    level: float = 0.95


def tail_sample(returns, tail: str = "loss") -> np.ndarray:
    """Positive magnitudes of one tail: losses as ``-r`` for ``r < 0``, gains as ``r > 0``."""
    r = np.asarray(returns, dtype=float)
    if tail == "loss":
        return -r[r < 0]
    if tail == "gain":
        return r[r > 0]
    raise ValueError(f"tail must be 'loss' or 'gain', not {tail!r}")


def default_k_max(n: int) -> int:
    return int(min(n // 10, 1000))


def hill_estimates(values, k_max: int, level: float = 0.95) -> HillCurve:
    """Hill estimator over the ``k`` largest of strictly positive ``values``, k = 2..k_max."""
    x = np.asarray(values, dtype=float)
    if np.any(~(x > 0)):
        raise NonPositiveTailValue("Hill estimator needs strictly positive values")
    if k_max < 2 or x.size < k_max + 1:
        raise InsufficientTail(f"need at least k_max+1={k_max + 1} tail values, have {x.size}")
    desc = np.sort(x)[::-1]
    logs = np.log(desc[: k_max + 1])
    k = np.arange(2, k_max + 1)
    # H(k) = mean(log X_(1..k)) - log X_(k+1)
    H = np.cumsum(logs)[k - 1] / k - logs[k]
    with np.errstate(divide="ignore"):
        alpha = 1.0 / H
    z = norm.ppf(0.5 + level / 2.0)
    half = z / np.sqrt(k)
    return HillCurve(k, alpha, alpha * (1.0 - half), alpha * (1.0 + half), level)


def hill_curve(returns, tail: str = "loss", k_max: int | None = None, level: float = 0.95) -> HillCurve:
    values = tail_sample(returns, tail)
    if k_max is None:
        k_max = default_k_max(values.size)
    return hill_estimates(values, k_max, level)


def write_hill_csv(path, curve: HillCurve) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["k", "alpha", "ci_low", "ci_high"])
        for row in zip(curve.k_values, curve.hill, curve.ci_low, curve.ci_high):
            out.writerow([int(row[0]), *(repr(float(v)) for v in row[1:])])
