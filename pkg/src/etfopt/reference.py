"""Published ratio values for the original 30-ETF universe and a checker.

The values come from a historical backtest over a proprietary price snapshot,
so agreement is only expected when the user supplies that same data.  The
checker reports every cell as pass/fail at a relative tolerance and never
raises on divergence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

_LABELS = ("EWP", "LO_MVP", "LO_TVP", "LO_C95", "LO_TC95", "LO_C99", "LO_TC99",
           "LS_MVP", "LS_TVP", "LS_C95", "LS_TC95", "LS_C99", "LS_TC99")

REFERENCE: dict[str, dict[str, float]] = {
    "sharpe": {
        "LS_TVP": 0.059474467, "LS_TC95": 0.059474467, "LS_TC99": 0.059474467,
        "LS_C95": 0.028857923, "LO_TVP": 0.022564225, "LO_TC95": 0.022564225,
        "LO_TC99": 0.022564225, "LS_MVP": 0.01856749, "LS_C99": 0.012710158,
        "EWP": 0.007972721, "LO_C99": 0.004834784, "LO_MVP": 0.000401662,
        "LO_C95": -0.001006328,
    },
    "max_drawdown": {
        "LS_TC95": 0.591018918, "LS_TC99": 0.591018918, "LS_TVP": 0.591018918,
        "EWP": 0.365943773, "LO_TVP": 0.317027745, "LO_TC95": 0.317027745,
        "LO_TC99": 0.317027745, "LO_MVP": 0.313304961, "LO_C99": 0.308339959,
        "LO_C95": 0.303296926, "LS_MVP": 0.239419095, "LS_C95": 0.191313723,
        "LS_C99": 0.158217606,
    },
    "calmar": {
        "LS_TVP": 1.486, "LS_TC95": 1.486, "LS_TC99": 1.486, "LS_C95": 0.406,
        "LO_TVP": 0.365, "LO_TC95": 0.365, "LO_TC99": 0.365, "LS_C99": 0.326,
        "LS_MVP": 0.237, "EWP": 0.138, "LO_C99": 0.118, "LO_MVP": 0.079, "LO_C95": 0.070,
    },
    "starr95": {
        "LS_TVP": 1.059, "LS_TC95": 1.059, "LS_TC99": 1.059, "LS_C95": 0.622,
        "LS_MVP": 0.440, "LO_TVP": 0.361, "LO_TC95": 0.361, "LO_TC99": 0.361,
        "LS_C99": 0.257, "EWP": 0.165, "LO_C99": 0.141, "LO_MVP": 0.097, "LO_C95": 0.083,
    },
    "var95": {
        "LO_MVP": -0.0128, "LO_TVP": -0.0238, "LO_C95": -0.0125, "LO_TC95": -0.0238,
        "LO_C99": -0.0137, "LO_TC99": -0.0238, "LS_MVP": -0.0091, "LS_TVP": -0.0647,
        "LS_C95": -0.0091, "LS_TC95": -0.0647, "LS_C99": -0.0124, "LS_TC99": -0.0647,
        "EWP": -0.0172,
    },
    "cvar95": {
        "LO_MVP": -0.0230, "LO_TVP": -0.0371, "LO_C95": -0.0227, "LO_TC95": -0.0371,
        "LO_C99": -0.0234, "LO_TC99": -0.0371, "LS_MVP": -0.0157, "LS_TVP": -0.0923,
        "LS_C95": -0.0146, "LS_TC95": -0.0923, "LS_C99": -0.0176, "LS_TC99": -0.0923,
        "EWP": -0.0304,
    },
    "var99": {
        "LO_MVP": -0.0273, "LO_TVP": -0.0432, "LO_C95": -0.0247, "LO_TC95": -0.0432,
        "LO_C99": -0.0272, "LO_TC99": -0.0432, "LS_MVP": -0.0175, "LS_TVP": -0.1114,
        "LS_C95": -0.0140, "LS_TC95": -0.1114, "LS_C99": -0.0189, "LS_TC99": -0.1114,
        "EWP": -0.0334,
    },
    "cvar99": {
        "LO_MVP": -0.0487, "LO_TVP": -0.0624, "LO_C95": -0.0493, "LO_TC95": -0.0624,
        "LO_C99": -0.0481, "LO_TC99": -0.0624, "LS_MVP": -0.0325, "LS_TVP": -0.1259,
        "LS_C95": -0.0304, "LS_TC95": -0.1259, "LS_C99": -0.0265, "LS_TC99": -0.1259,
        "EWP": -0.0633,
    },
    # Published with a negative sign; this toolkit reports the positive
    # gain/loss ratio, so these cells are compared by magnitude.
    "rachev": {
        "LS_TC95": -0.8499, "LS_TC99": -0.8499, "LS_TVP": -0.8499, "LS_C95": -0.9166,
        "LO_TVP": -0.9386, "LO_TC95": -0.9386, "LO_TC99": -0.9386, "LS_MVP": -0.9450,
        "LS_C99": -0.9659, "EWP": -0.9763, "LO_C99": -0.9855, "LO_MVP": -0.9988,
        "LO_C95": -1.0031,
    },
    "sortino": {
        "LS_TVP": 0.0599, "LS_TC95": 0.0599, "LS_TC99": 0.0599, "LS_C95": 0.0265,
        "LO_TVP": 0.0208, "LO_TC95": 0.0208, "LO_TC99": 0.0208, "LS_MVP": 0.0165,
        "LS_C99": 0.0128, "EWP": 0.0073, "LO_C99": 0.0045, "LO_MVP": 0.0004, "LO_C95": -0.0009,
    },
    "jensens_alpha": {
        "LS_TC95": 0.0022, "LS_TC99": 0.0022, "LS_TVP": 0.0022, "LO_TVP": 0.0001,
        "LO_TC95": 0.0001, "LO_TC99": 0.0001, "LS_C95": 0.0001, "LS_MVP": 0.00006,
        "LS_C99": 0.00005, "EWP": -0.0001, "LO_C99": -0.0001, "LO_MVP": -0.0001, "LO_C95": -0.0002,
    },
}

SIGNED_BY_MAGNITUDE = {"rachev"}
DEFAULT_TOLERANCE = 0.10
EWP_MDD = 0.3659
EWP_MDD_TOL = 0.02


@dataclass(frozen=True)
class CellCheck:
    metric: str
    strategy: str
    reference: float
    computed: float
    passed: bool

    @property
    def rel_error(self) -> float:
        if not math.isfinite(self.computed):
            return math.inf
        return abs(self.computed - self.reference) / max(abs(self.reference), 1e-12)


def check_cells(computed: dict, tol: float = DEFAULT_TOLERANCE) -> list[CellCheck]:
    """``computed`` maps strategy label -> {metric: value} (RatioReport.as_dict() works)."""
    out = []
    for metric, table in REFERENCE.items():
        for label in _LABELS:
            ref = table[label]
            val = float(computed.get(label, {}).get(metric, math.nan))
            cmp_val, cmp_ref = (abs(val), abs(ref)) if metric in SIGNED_BY_MAGNITUDE else (val, ref)
            ok = math.isfinite(val) and abs(cmp_val - cmp_ref) <= tol * abs(cmp_ref)
            out.append(CellCheck(metric, label, ref, val, ok))
    return out


def sharpe_ranking_matches(computed: dict) -> bool:
    """True when computed Sharpe ratios order the strategies as the reference does (ties ignored)."""
    ref = REFERENCE["sharpe"]
    for a in _LABELS:
        for b in _LABELS:
            if ref[a] > ref[b] + 1e-12:
                va = computed.get(a, {}).get("sharpe", math.nan)
                vb = computed.get(b, {}).get("sharpe", math.nan)
                if not va > vb:
                    return False
    return True


def format_report(checks: list[CellCheck]) -> list[str]:
    lines = []
    for c in checks:
        tag = "PASS" if c.passed else "DIVERGES"
        lines.append(f"{tag:8s} {c.metric:14s} {c.strategy:8s} reference={c.reference:+.6g} computed={c.computed:+.6g}")
    n_pass = sum(c.passed for c in checks)
    lines.append(f"{n_pass}/{len(checks)} reference cells within tolerance")
    return lines


def write_checks_csv(path, checks: list[CellCheck]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["metric", "strategy", "reference", "computed", "status"])
        for c in checks:
            out.writerow([c.metric, c.strategy, repr(c.reference), repr(c.computed),
                          "pass" if c.passed else "diverges"])
