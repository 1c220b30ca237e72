"""INI run configuration.

Every tunable has a key with its default; paths are resolved relative to the
config file.  ``DEFAULT_INI`` is the full annotated template.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .portfolio import StrategySpec

DEFAULT_INI = """\
[data]
# manifest of price files: one "TICKER = path" line per asset
manifest =
# CSV with date,annual_rate_percent (blank: zero risk-free rate)
riskfree =
# simple or log
return_kind = simple
# ticker singled out in frontier plots and used as a regression benchmark
focus_ticker =
# optional external index (date,close) used as a Hill comparison series
index_file =
index_name = INDEX

[backtest]
window_length = 1008
# comma separated labels or "all"
strategies = all
mode = historical
scenario_count = 10000
seed = 0
# dynamic mode: re-estimate AG models and the copula every k days
refit_every = 1
ag_starts = 8
warm_starts = 1
# |w_i| bound for long-short optimizers
ls_bound = 1.0
initial = 100
# highs (warm-started LP models) or scipy
lp_backend = highs

[risk]
confidences = 0.95, 0.99

[tail]
# blank: min(n // 10, 1000)
k_max =
level = 0.95
tail = loss
# series for Hill plots: EWP, the index name, or panel tickers
pairs = EWP, INDEX

[regression]
huber_c = 1.345
# regress every panel column on these: EWP and/or tickers
benchmarks = EWP

[frontier]
points = 50
regime = long_short
# rows used for the frontier estimate; 0 means the whole panel
window_length = 0
"""


@dataclass
class RunConfig:
    path: Optional[Path]
    manifest: Optional[Path] = None
    riskfree: Optional[Path] = None
    return_kind: str = "simple"
    focus_ticker: str = ""
    index_file: Optional[Path] = None
    index_name: str = "INDEX"
    window_length: int = 1008
    strategies: tuple = field(default_factory=lambda: tuple(StrategySpec.parse(s) for s in strategy_labels()))
    mode: str = "historical"
    scenario_count: int = 10000
    seed: int = 0
    refit_every: int = 1
    ag_starts: int = 8
    warm_starts: int = 1
    ls_bound: float = 1.0
    initial: float = 100.0
    lp_backend: str = "highs"
    confidences: tuple = (0.95, 0.99)
    k_max: Optional[int] = None
    hill_level: float = 0.95
    hill_tail: str = "loss"
    hill_pairs: tuple = ("EWP", "INDEX")
    huber_c: float = 1.345
    regression_benchmarks: tuple = ("EWP",)
    frontier_points: int = 50
    frontier_regime: str = "long_short"
    frontier_window: int = 0


def strategy_labels(confidences=(0.95, 0.99)) -> tuple:
    """EWP plus every family in both regimes, CVaR families once per confidence."""
    out = ["EWP"]
    for prefix in ("LO", "LS"):
        out += [f"{prefix}_MVP", f"{prefix}_TVP"]
        for c in confidences:
            pct = round(c * 100)
            if abs(pct - c * 100) > 1e-9:
                raise ValueError(f"confidence {c} must be a whole percentage")
            out += [f"{prefix}_C{pct}", f"{prefix}_TC{pct}"]
    return tuple(out)


def _list(text: str) -> tuple:
    return tuple(t.strip() for t in text.replace("\n", ",").split(",") if t.strip())


def _path(base: Path, text: str) -> Optional[Path]:
    text = text.strip()
    if not text:
        return None
    p = Path(text)
    return p if p.is_absolute() else (base / p)


def load_config(path=None) -> RunConfig:
    """Read an INI file layered over the defaults; ``None`` gives the defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(DEFAULT_INI)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
        known = configparser.ConfigParser()
        known.read_string(DEFAULT_INI)
        for section in cp.sections():
            if not known.has_section(section):
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key in cp[section]:
                if key not in known[section]:
                    raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
    try:
        d, b, t, r, f = cp["data"], cp["backtest"], cp["tail"], cp["regression"], cp["frontier"]
        confidences = tuple(float(x) for x in _list(cp["risk"]["confidences"]))
        labels = _list(b["strategies"])
        if len(labels) == 1 and labels[0].lower() == "all":
            labels = strategy_labels(confidences)
        index_name = d["index_name"].strip() or "INDEX"
        pairs = tuple(index_name if p == "INDEX" else p for p in _list(t["pairs"]))
        k_max = t["k_max"].strip()
        cfg = RunConfig(
            path=path,
            manifest=_path(base, d["manifest"]),
            riskfree=_path(base, d["riskfree"]),
            return_kind=d["return_kind"].strip(),
            focus_ticker=d["focus_ticker"].strip(),
            index_file=_path(base, d["index_file"]),
            index_name=index_name,
            window_length=b.getint("window_length"),
            strategies=tuple(StrategySpec.parse(s) for s in labels),
            mode=b["mode"].strip(),
            scenario_count=b.getint("scenario_count"),
            seed=b.getint("seed"),
            refit_every=b.getint("refit_every"),
            ag_starts=b.getint("ag_starts"),
            warm_starts=b.getint("warm_starts"),
            ls_bound=b.getfloat("ls_bound"),
            initial=b.getfloat("initial"),
            lp_backend=b["lp_backend"].strip(),
            confidences=confidences,
            k_max=int(k_max) if k_max else None,
            hill_level=t.getfloat("level"),
            hill_tail=t["tail"].strip(),
            hill_pairs=pairs,
            huber_c=r.getfloat("huber_c"),
            regression_benchmarks=_list(r["benchmarks"]),
            frontier_points=f.getint("points"),
            frontier_regime=f["regime"].strip(),
            frontier_window=f.getint("window_length"),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path or 'defaults'}: {exc}") from None
    if cfg.mode not in ("historical", "dynamic"):
        raise ConfigError(f"mode must be historical or dynamic, got {cfg.mode!r}")
    if cfg.return_kind not in ("simple", "log"):
        raise ConfigError(f"return_kind must be simple or log, got {cfg.return_kind!r}")
    if cfg.hill_tail not in ("loss", "gain"):
        raise ConfigError("tail must be loss or gain")
    if cfg.frontier_regime not in ("long_short", "long_only"):
        raise ConfigError("frontier regime must be long_short or long_only")
    return cfg
