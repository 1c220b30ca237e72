"""Price/risk-free CSV loading, calendar alignment and return panels."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateDate,
    EmptyIntersection,
    LengthMismatch,
    MalformedRow,
    NoCoverage,
    NonPositivePrice,
)

TRADING_DAYS = 252


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    prices: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise LengthMismatch(f"{self.ticker}: {len(self.dates)} dates vs {len(self.prices)} prices")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates).astype(np.int64) > 0):
            raise ValueError(f"{self.ticker}: dates must be strictly increasing")
        if np.any(~(self.prices > 0)):
            raise ValueError(f"{self.ticker}: prices must be positive")

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True)
class ReturnPanel:
    dates: np.ndarray  # (T,) datetime64[D]
    tickers: tuple
    returns: np.ndarray  # (T, N)
    kind: str = "simple"

    def __post_init__(self):
        if self.kind not in ("simple", "log"):
            raise ValueError(f"unknown return kind {self.kind!r}")
        if self.returns.ndim != 2:
            raise ValueError("returns must be a T x N matrix")
        if self.returns.shape != (len(self.dates), len(self.tickers)):
            raise LengthMismatch(
                f"returns shape {self.returns.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("return panel contains missing or non-finite cells")
        if self.kind == "simple" and np.any(self.returns <= -1.0):
            raise ValueError("simple returns must exceed -1")

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def N(self) -> int:
        return self.returns.shape[1]

    def simple(self) -> np.ndarray:
        return np.expm1(self.returns) if self.kind == "log" else self.returns

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.tickers.index(ticker)]

    def slice(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(self.dates[start:stop], self.tickers, self.returns[start:stop], self.kind)

    def select(self, tickers: Sequence[str]) -> "ReturnPanel":
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnPanel(self.dates, tuple(tickers), self.returns[:, idx], self.kind)


@dataclass(frozen=True)
class RiskFreeSeries:
    dates: np.ndarray
    daily_rate: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.daily_rate):
            raise LengthMismatch("risk-free dates and rates differ in length")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates).astype(np.int64) > 0):
            raise ValueError("risk-free dates must be strictly increasing")
        if not np.all(np.isfinite(self.daily_rate)):
            raise ValueError("risk-free rates must be finite")


def _parse_date(text):
    return np.datetime64(dt.date.fromisoformat(text.strip()), "D")


def _read_two_column_csv(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise MalformedRow(path, 1, "empty file") from None
        if [c.strip().lower() for c in first] != list(header):
            raise MalformedRow(path, 1, f"expected header {','.join(header)}")
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedRow(path, line, f"expected 2 fields, got {len(row)}")
            try:
                date = _parse_date(row[0])
            except ValueError:
                raise MalformedRow(path, line, f"bad date {row[0]!r}") from None
            try:
                value = float(row[1])
            except ValueError:
                raise MalformedRow(path, line, f"bad number {row[1]!r}") from None
            if not np.isfinite(value):
                raise MalformedRow(path, line, f"non-finite number {row[1]!r}")
            rows.append((date, value, line))
    return path, rows


def _sorted_unique(path, rows):
    seen = {}
    for date, _, line in rows:
        if date in seen:
            raise DuplicateDate(path, line, date)
        seen[date] = line
    rows = sorted(rows, key=lambda r: r[0])
    dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
    values = np.array([r[1] for r in rows], dtype=float)
    return dates, values


def load_price_csv(path, ticker: str | None = None) -> PriceSeries:
    """Read a ``date,close`` file; rows may come in any order."""
    path, rows = _read_two_column_csv(path, ("date", "close"))
    for _, value, line in rows:
        if value <= 0:
            raise NonPositivePrice(path, line, value)
    dates, prices = _sorted_unique(path, rows)
    return PriceSeries(ticker or path.stem, dates, prices)


def load_riskfree_csv(path) -> RiskFreeSeries:
    """Read a ``date,annual_rate_percent`` file and convert to daily decimals."""
    path, rows = _read_two_column_csv(path, ("date", "annual_rate_percent"))
    dates, pct = _sorted_unique(path, rows)
    return RiskFreeSeries(dates, annual_percent_to_daily(pct))


def annual_percent_to_daily(pct):
    return np.asarray(pct, dtype=float) / (100.0 * TRADING_DAYS)


def read_manifest(path) -> dict[str, Path]:
    """Parse a universe manifest: one ``TICKER = path`` (or ``TICKER,path``) per line.

    Relative paths resolve against the manifest's directory; ``#`` starts a comment.
    """
    path = Path(path)
    out: dict[str, Path] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ",", None):
            parts = line.split(sep, 1) if sep else line.split(None, 1)
            if len(parts) == 2:
                break
        else:
            raise MalformedRow(path, line_no, "expected 'TICKER = path'")
        ticker, file = parts[0].strip(), parts[1].strip()
        if ticker in out:
            raise MalformedRow(path, line_no, f"ticker {ticker} listed twice")
        p = Path(file)
        out[ticker] = p if p.is_absolute() else path.parent / p
    return out


def shared_calendar(series: Sequence[PriceSeries]) -> np.ndarray:
    common = series[0].dates
    for s in series[1:]:
        common = np.intersect1d(common, s.dates, assume_unique=True)
    return common


def compute_returns(series: Sequence[PriceSeries], kind: str = "simple") -> ReturnPanel:
    """Daily returns on the calendar shared by every series (inner join)."""
    if not series:
        raise ValueError("need at least one price series")
    if kind not in ("simple", "log"):
        raise ValueError(f"unknown return kind {kind!r}")
    common = shared_calendar(series)
    if len(common) < 2:
        raise EmptyIntersection(
            f"only {len(common)} shared dates across {[s.ticker for s in series]}"
        )
    cols = []
    for s in series:
        idx = np.searchsorted(s.dates, common)
        p = s.prices[idx]
        ratio = p[1:] / p[:-1]
        cols.append(np.log(ratio) if kind == "log" else ratio - 1.0)
    return ReturnPanel(common[1:], tuple(s.ticker for s in series), np.column_stack(cols), kind)


def cumulative_price(panel: ReturnPanel, weights_by_day, initial: float = 100.0) -> np.ndarray:
    """Value of a daily-rebalanced portfolio, ``initial`` invested before day 0.

    ``weights_by_day`` is a T x N array or a sequence of WeightVector.  The
    returned path has T entries: the value after each day's return.
    """
    from .kernels import compound

    if initial <= 0:
        raise ValueError("initial investment must be positive")
    W = np.asarray([getattr(w, "weights", w) for w in weights_by_day], dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape != panel.returns.shape:
        raise LengthMismatch(f"weights {W.shape} vs returns {panel.returns.shape}")
    port = np.einsum("tn,tn->t", W, panel.simple())
    return compound(port, initial)


def align_riskfree(panel: ReturnPanel, rf: RiskFreeSeries) -> RiskFreeSeries:
    """One daily rate per panel date, forward-filling gaps."""
    if len(rf.dates) == 0 or rf.dates[0] > panel.dates[0]:
        raise NoCoverage(
            f"risk-free series starts {rf.dates[0] if len(rf.dates) else 'never'}, "
            f"after panel start {panel.dates[0]}"
        )
    idx = np.searchsorted(rf.dates, panel.dates, side="right") - 1
    return RiskFreeSeries(panel.dates.copy(), rf.daily_rate[idx].copy())


def constant_riskfree(dates, daily_rate: float = 0.0) -> RiskFreeSeries:
    return RiskFreeSeries(np.asarray(dates, dtype="datetime64[D]"), np.full(len(dates), float(daily_rate)))


# -- CSV output ------------------------------------------------------------------

def write_panel_csv(panel: ReturnPanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.returns):
            w.writerow([str(d), *(repr(float(x)) for x in row)])


def read_panel_csv(path, kind: str = "simple") -> ReturnPanel:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip().lower() != "date":
            raise MalformedRow(path, 1, "panel header must start with 'date'")
        dates, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(_parse_date(row[0]))
                rows.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise MalformedRow(path, line, str(exc)) from None
    return ReturnPanel(np.array(dates, dtype="datetime64[D]"), tuple(h.strip() for h in header[1:]),
                       np.array(rows, dtype=float).reshape(len(dates), len(header) - 1), kind)
