"""Weight vectors, strategy labels and the equally weighted benchmark."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DimensionMismatch, ZeroAssets

LONG_ONLY = "long_only"
LONG_SHORT = "long_short"
REGIMES = (LONG_ONLY, LONG_SHORT)

SUM_TOL = 1e-8
NEG_TOL = 1e-10
DEFAULT_GROSS_BOUND = 2.0


@dataclass(frozen=True)
class WeightVector:
    tickers: tuple
    weights: np.ndarray
    regime: str = LONG_ONLY
    gross_bound: float = DEFAULT_GROSS_BOUND

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if w.shape != (len(self.tickers),):
            raise DimensionMismatch(f"{len(self.tickers)} tickers but weights shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {w.sum():.12g}, not 1")
        if self.regime == LONG_ONLY and np.any(w < -NEG_TOL):
            raise ValueError(f"long-only weights contain {w.min():.3g} < 0")
        if self.regime == LONG_SHORT and np.any(np.abs(w) > self.gross_bound + 1e-9):
            raise ValueError(f"long-short weight {np.abs(w).max():.4g} exceeds bound {self.gross_bound}")

    def __len__(self):
        return len(self.weights)

    def as_dict(self) -> dict:
        return dict(zip(self.tickers, self.weights.tolist()))


# Strategy families
EWP = "EWP"
MVP = "MVP"
TVP = "TVP"
CVAR_MIN = "CVAR_MIN"
CVAR_TANGENT = "CVAR_TANGENT"
FAMILIES = (EWP, MVP, TVP, CVAR_MIN, CVAR_TANGENT)


@dataclass(frozen=True)
class StrategySpec:
    family: str
    regime: str = LONG_ONLY
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown strategy family {self.family!r}")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        needs_conf = self.family in (CVAR_MIN, CVAR_TANGENT)
        if needs_conf != (self.confidence is not None):
            raise ValueError(f"{self.family}: confidence is required exactly for CVaR families")
        if needs_conf and not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")

    @property
    def label(self) -> str:
        if self.family == EWP:
            return "EWP"
        prefix = "LO" if self.regime == LONG_ONLY else "LS"
        if self.family in (MVP, TVP):
            return f"{prefix}_{self.family}"
        pct = int(round(self.confidence * 100))
        return f"{prefix}_{'C' if self.family == CVAR_MIN else 'TC'}{pct}"

    @classmethod
    def parse(cls, label: str) -> "StrategySpec":
        """Inverse of :attr:`label`, e.g. ``"LS_TC99"`` or ``"EWP"``."""
        text = label.strip().upper().replace(" ", "_")
        if text in ("EWP", "EQW"):
            return cls(EWP)
        try:
            prefix, body = text.split("_", 1)
            regime = {"LO": LONG_ONLY, "LS": LONG_SHORT}[prefix]
        except (ValueError, KeyError):
            raise ValueError(f"cannot parse strategy label {label!r}") from None
        if body in (MVP, TVP):
            return cls(body, regime)
        if body.startswith("TC") and body[2:].isdigit():
            return cls(CVAR_TANGENT, regime, int(body[2:]) / 100)
        if body.startswith("C") and body[1:].isdigit():
            return cls(CVAR_MIN, regime, int(body[1:]) / 100)
        raise ValueError(f"cannot parse strategy label {label!r}")


ALL_LABELS = (
    "EWP",
    "LO_MVP", "LO_TVP", "LO_C95", "LO_C99", "LO_TC95", "LO_TC99",
    "LS_MVP", "LS_TVP", "LS_C95", "LS_C99", "LS_TC95", "LS_TC99",
)


def equal_weights(n: int, tickers: Optional[Iterable[str]] = None) -> WeightVector:
    if n < 1:
        raise ZeroAssets("equal weighting needs at least one asset")
    tickers = tuple(tickers) if tickers is not None else tuple(f"A{i}" for i in range(n))
    return WeightVector(tickers, np.full(n, 1.0 / n), LONG_ONLY)


def portfolio_return(weights, asset_returns) -> float:
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    r = np.asarray(asset_returns, dtype=float)
    if w.shape != r.shape:
        raise DimensionMismatch(f"weights {w.shape} vs returns {r.shape}")
    return float(w @ r)


def write_weights_csv(path, dates, weights: Iterable[WeightVector]) -> None:
    """Audit trail: one ``date,ticker,weight`` row per asset per day."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["date", "ticker", "weight"])
        for d, wv in zip(dates, weights):
            for t, x in zip(wv.tickers, wv.weights):
                out.writerow([str(d), t, repr(float(x))])


def read_weights_csv(path) -> tuple[list, list[dict]]:
    dates: list = []
    rows: list[dict] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            if not dates or dates[-1] != rec["date"]:
                dates.append(rec["date"])
                rows.append({})
            rows[-1][rec["ticker"]] = float(rec["weight"])
    return dates, rows
