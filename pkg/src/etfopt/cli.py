"""Batch command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import backtest as bt
from . import mean_variance as mv
from . import metrics, reference, robust, svg, tail
from .config import load_config
from .errors import ConfigError, DataError, EtfoptError, WindowFailure, origin_module
from .market_data import (
    ReturnPanel,
    compute_returns,
    constant_riskfree,
    load_price_csv,
    load_riskfree_csv,
    read_manifest,
    read_panel_csv,
    write_panel_csv,
)
from .portfolio import LONG_ONLY, LONG_SHORT

log = logging.getLogger("etfopt")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
COMPARISON_METRICS = ("sharpe", "calmar", "starr95")


class UsageError(Exception):
    pass


# -- helpers ----------------------------------------------------------------------

def _load_series(manifest_path):
    entries = read_manifest(manifest_path)
    if not entries:
        raise UsageError(f"manifest {manifest_path} lists no ticker files")
    series, problems = [], []
    for ticker, path in entries.items():
        try:
            series.append(load_price_csv(path, ticker))
        except (OSError, DataError) as exc:
            problems.append(f"{path.name}: {exc}")
    if problems:
        raise DataError("could not load price files:\n  " + "\n  ".join(problems))
    return series


def _panel(cfg, out: Path) -> ReturnPanel:
    path = out / "panel.csv"
    if not path.exists():
        raise UsageError(f"{path} not found; run the ingest command first")
    return read_panel_csv(path, cfg.return_kind)


def _riskfree(cfg, panel):
    if cfg.riskfree is None:
        log.info("no risk-free file configured; using a zero rate")
        return constant_riskfree(panel.dates, 0.0)
    return load_riskfree_csv(cfg.riskfree)


def _aligned_rf(cfg, panel) -> np.ndarray:
    from .market_data import align_riskfree

    return align_riskfree(panel, _riskfree(cfg, panel)).daily_rate


def _ewp_returns(panel: ReturnPanel) -> np.ndarray:
    return panel.simple().mean(axis=1)


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def _num(v) -> str:
    return repr(float(v))


# -- commands ---------------------------------------------------------------------

def cmd_ingest(cfg, args, out: Path) -> list[str]:
    if cfg.manifest is None:
        raise UsageError("config has no [data] manifest")
    if not cfg.manifest.is_file():
        raise UsageError(f"manifest not found: {cfg.manifest}")
    panel = compute_returns(_load_series(cfg.manifest), cfg.return_kind)
    out.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, out / "panel.csv")
    summary = (f"T = {panel.T}\nN = {panel.N}\nfirst = {panel.dates[0]}\nlast = {panel.dates[-1]}\n"
               f"tickers = {', '.join(panel.tickers)}\n")
    (out / "panel_summary.txt").write_text(summary, encoding="utf-8")
    print(f"ingested {panel.N} tickers, {panel.T} return rows ({panel.dates[0]} .. {panel.dates[-1]})")
    return [str(out / "panel.csv")]


def _backtest_config(cfg, args) -> bt.BacktestConfig:
    return bt.BacktestConfig(
        window_length=cfg.window_length,
        strategies=cfg.strategies,
        mode=cfg.mode,
        scenario_count=cfg.scenario_count,
        seed=cfg.seed,
        refit_every=cfg.refit_every,
        ag_starts=cfg.ag_starts,
        warm_starts=cfg.warm_starts,
        ls_bound=cfg.ls_bound,
        initial=cfg.initial,
        threads=args.threads,
        lp_backend=cfg.lp_backend,
    )


def _write_ratios(path, rows):
    body = []
    for row in rows:
        rep = row.report.as_dict()
        for m in metrics.METRIC_NAMES:
            body.append([row.strategy, m, _num(rep[m])])
        body.append([row.strategy, "terminal_price", _num(row.terminal_price)])
    _write_csv(path, ["portfolio", "metric", "value"], body)


def read_ratios(path) -> dict:
    table: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            table.setdefault(rec["portfolio"], {})[rec["metric"]] = float(rec["value"])
    return table


def _price_charts(results, out: Path, mode: str):
    ewp = next((r for r in results if r.label == "EWP"), None)
    for regime, tag in ((LONG_ONLY, "LO"), (LONG_SHORT, "LS")):
        group = [r for r in results if r.label != "EWP" and r.strategy.regime == regime]
        if not group:
            continue
        x = svg.dates_to_days(group[0].dates)
        price = svg.Chart(f"Cumulative price, {tag} strategies ({mode})", "date", "value of 100 invested",
                          date_axis=True)
        logret = svg.Chart(f"Daily log return, {tag} strategies ({mode})", "date", "log return", date_axis=True)
        for r in group:
            price.line(x, r.prices, r.label)
            logret.line(x, np.log1p(r.returns), r.label, width=0.6)
        if ewp is not None:
            price.line(x, ewp.prices, "EWP (benchmark)", highlight=True)
            logret.line(x, np.log1p(ewp.returns), "EWP (benchmark)", highlight=True, width=0.8)
        price.save(out / f"cumulative_price_{tag}.svg")
        logret.save(out / f"log_returns_{tag}.svg")


def write_mode_comparison(out: Path) -> Path | None:
    """``metric,strategy,historical,dynamic`` plus bar charts when both modes have run."""
    h, d = out / "historical" / "ratios.csv", out / "dynamic" / "ratios.csv"
    if not (h.exists() and d.exists()):
        return None
    hist, dyn = read_ratios(h), read_ratios(d)
    labels = [s for s in hist if s in dyn]
    rows = []
    for m in COMPARISON_METRICS:
        for s in labels:
            rows.append([m, s, _num(hist[s][m]), _num(dyn[s][m])])
        chart = svg.Chart(f"Historical vs dynamic: {m}", "", m, width=900)
        chart.bars(labels, {"historical": [hist[s][m] for s in labels], "dynamic": [dyn[s][m] for s in labels]})
        chart.hline(0.0)
        chart.save(out / f"historical_vs_dynamic_{m}.svg")
    path = out / "historical_vs_dynamic.csv"
    _write_csv(path, ["metric", "strategy", "historical", "dynamic"], rows)
    return path


def cmd_backtest(cfg, args, out: Path) -> list[str]:
    panel = _panel(cfg, out)
    rf = _riskfree(cfg, panel)
    bcfg = _backtest_config(cfg, args)
    step = max(1, (panel.T - bcfg.window_length) // 10)

    def progress(done, total):
        if done % step == 0 or done == total:
            log.info("%s backtest: %d/%d days", bcfg.mode, done, total)

    results = bt.run_backtest(panel, rf, bcfg, progress)
    mode_dir = out / bcfg.mode
    mode_dir.mkdir(parents=True, exist_ok=True)
    written = [str(p) for p in bt.write_results(mode_dir, results)]
    ewp = next((r for r in results if r.label == "EWP"), None)
    benchmark = ewp or bt.run_backtest(panel, rf, replace(bcfg, strategies=("EWP",)))[0]
    rf_out = _aligned_rf(cfg, panel)[bcfg.window_length:]
    rows = bt.compare_to_benchmark(results, benchmark, rf_out)
    _write_ratios(mode_dir / "ratios.csv", [r for r in rows if r.strategy in {x.label for x in results}])
    _price_charts(results, mode_dir, bcfg.mode)
    events = [w for r in results for w in r.warnings]
    _write_csv(mode_dir / "warnings.csv", ["date", "strategy", "message"],
               [[str(w.date), w.strategy, w.message] for w in events])
    cmp_path = write_mode_comparison(out)
    if cmp_path is not None:
        written.append(str(cmp_path))
    print(f"{bcfg.mode} backtest: {len(results)} strategies over {len(results[0].dates)} days; "
          f"{len(events)} solver warnings")
    return written


def cmd_frontier(cfg, args, out: Path) -> list[str]:
    panel = _panel(cfg, out)
    R = panel.simple()
    rf_all = _aligned_rf(cfg, panel)
    if cfg.frontier_window:
        R, rf_all = R[-cfg.frontier_window:], rf_all[-cfg.frontier_window:]
    rf = float(np.mean(rf_all))
    m = mv.estimate_moments(R, panel.tickers)
    points = mv.frontier_curve(m, cfg.frontier_points, cfg.frontier_regime, cfg.ls_bound)
    dest = out / "frontier"
    dest.mkdir(parents=True, exist_ok=True)
    mv.write_frontier_csv(dest / "frontier.csv", points)
    sd = np.sqrt(np.diag(m.cov))
    w_eq = np.full(panel.N, 1.0 / panel.N)
    ewp_mean, ewp_sd = float(w_eq @ m.mean), float(np.sqrt(w_eq @ m.cov @ w_eq))
    markers = [[t, _num(mu), _num(s)] for t, mu, s in zip(panel.tickers, m.mean, sd)]
    markers.append(["EWP", _num(ewp_mean), _num(ewp_sd)])
    chart = svg.Chart("Efficient frontier", "daily standard deviation", "daily mean return")
    chart.line([p.stdev for p in points], [p.target_return for p in points], "frontier", color="#1f77b4", width=2)
    try:
        tan = mv.tangency_portfolio(m, rf, LONG_SHORT if cfg.frontier_regime == "long_short" else LONG_ONLY,
                                    np.inf if cfg.frontier_regime == "long_short" else cfg.ls_bound)
        cml = mv.capital_market_line(tan, rf)
        smax = max(max(p.stdev for p in points), float(sd.max()))
        mv.write_cml_csv(dest / "cml.csv", cml, smax)
        s, r = cml.sample(smax)
        chart.line(s, r, "capital market line", color="#2ca02c", dash="6 4")
        markers.append(["TANGENCY", _num(tan.target_return), _num(tan.stdev)])
    except EtfoptError as exc:
        log.warning("no capital market line: %s", exc)
    names = [t if t != cfg.focus_ticker else "" for t in panel.tickers]
    chart.scatter(sd, m.mean, names, legend="assets")
    chart.scatter([ewp_sd], [ewp_mean], ["EWP"], color="#d62728", size=5, legend="EWP")
    if cfg.focus_ticker:
        if cfg.focus_ticker not in panel.tickers:
            raise UsageError(f"focus_ticker {cfg.focus_ticker} is not in the panel")
        j = panel.tickers.index(cfg.focus_ticker)
        chart.scatter([sd[j]], [m.mean[j]], [cfg.focus_ticker], color="#9467bd", size=5, legend=cfg.focus_ticker)
        gap = m.mean[j] - float(np.interp(sd[j], [p.stdev for p in points], [p.target_return for p in points]))
        print(f"{cfg.focus_ticker} sits {'below' if gap < 0 else 'on/above'} the frontier (gap {gap:.3g})")
    _write_csv(dest / "markers.csv", ["name", "mean", "stdev"], markers)
    chart.save(dest / "frontier.svg")
    print(f"frontier: {len(points)} points, rf = {rf:.3g} per day")
    return [str(dest / "frontier.csv")]


def _named_series(cfg, panel, name):
    if name == "EWP":
        return _ewp_returns(panel)
    if name in panel.tickers:
        return panel.simple()[:, panel.tickers.index(name)]
    if name == cfg.index_name and cfg.index_file is not None:
        s = load_price_csv(cfg.index_file, name)
        return s.prices[1:] / s.prices[:-1] - 1.0
    raise UsageError(f"unknown series {name!r}: not EWP, a panel ticker, or the configured index")


def cmd_diagnose(cfg, args, out: Path) -> list[str]:
    panel = _panel(cfg, out)
    dest = out / "diagnose"
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    hill_chart = svg.Chart("Hill tail index with Wald band", "k (order statistics)", "tail index")
    for name in cfg.hill_pairs:
        if name == cfg.index_name and cfg.index_file is None:
            log.info("no index file configured; skipping Hill series %s", name)
            continue
        curve = tail.hill_curve(_named_series(cfg, panel, name), cfg.hill_tail, cfg.k_max, cfg.hill_level)
        path = dest / f"hill_{name}.csv"
        tail.write_hill_csv(path, curve)
        single = svg.Chart(f"Hill estimate: {name}", "k", "tail index")
        single.band(curve.k_values, curve.ci_low, curve.ci_high).line(curve.k_values, curve.hill, name)
        single.save(dest / f"hill_{name}.svg")
        hill_chart.line(curve.k_values, curve.hill, name)
        written.append(str(path))
    if written:
        hill_chart.save(dest / "hill_overlay.svg")
    for b in cfg.regression_benchmarks:
        x = _named_series(cfg, panel, b)
        fits = robust.benchmark_panel_fit(panel, x, cfg.huber_c, b)
        path = dest / f"regression_vs_{b}.csv"
        robust.write_fits_csv(path, fits)
        chart = svg.Chart(f"Huber beta vs {b} (95% CI)", "", "beta", width=max(600, 40 * len(fits)))
        chart.errorbars([f.ticker for f in fits], [f.beta for f in fits],
                        [f.ci95_beta[0] for f in fits], [f.ci95_beta[1] for f in fits])
        chart.save(dest / f"regression_vs_{b}.svg")
        width = np.mean([f.ci95_beta[1] - f.ci95_beta[0] for f in fits])
        print(f"regression vs {b}: {len(fits)} fits, mean beta CI width {width:.4g}")
        written.append(str(path))
    return written


def cmd_report(cfg, args, out: Path) -> list[str]:
    path = out / "historical" / "ratios.csv"
    if not path.exists():
        raise UsageError(f"{path} not found; run a historical backtest first")
    table = read_ratios(path)
    checks = reference.check_cells(table)
    dest = out / "report"
    dest.mkdir(parents=True, exist_ok=True)
    reference.write_checks_csv(dest / "reference_check.csv", checks)
    for line in reference.format_report(checks):
        print(line)
    ranking = reference.sharpe_ranking_matches(table)
    mdd = table.get("EWP", {}).get("max_drawdown", math.nan)
    mdd_ok = abs(mdd - reference.EWP_MDD) <= reference.EWP_MDD_TOL
    print(f"{'PASS' if ranking else 'DIVERGES'} Sharpe ranking matches the reference ordering")
    print(f"{'PASS' if mdd_ok else 'DIVERGES'} EWP max drawdown {mdd:.4f} vs {reference.EWP_MDD} +/- {reference.EWP_MDD_TOL}")
    written = [str(dest / "reference_check.csv")]
    cmp_path = write_mode_comparison(out)
    if cmp_path is not None:
        written.append(str(cmp_path))
    return written


COMMANDS = {
    "ingest": cmd_ingest,
    "backtest": cmd_backtest,
    "frontier": cmd_frontier,
    "diagnose": cmd_diagnose,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="INI run configuration")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override [backtest] seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    common.add_argument("--mode", choices=bt.MODES, default=argparse.SUPPRESS, help="override [backtest] mode")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="etfopt", parents=[common],
                                     description="Portfolio optimization backtests and diagnostics.")
    parser.add_argument("--version", action="version", version=f"etfopt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    help_text = {
        "ingest": "load price files into a return panel",
        "backtest": "rolling-window backtest of every configured strategy",
        "frontier": "efficient frontier, capital market line and asset markers",
        "diagnose": "Hill tail curves and robust benchmark regressions",
        "report": "compare historical ratios against the published reference values",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=help_text[name])
    return parser


def _write_manifest(out: Path, cfg_path, seed, commands):
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_path": Path(cfg_path).name if cfg_path else None,
        "output_dir": ".",
        "commands_run": commands,
        "seed": seed,
        "toolkit_version": __version__,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args.threads = getattr(args, "threads", 1)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    out = Path(getattr(args, "out", "out"))
    cfg_path = getattr(args, "config", None)
    try:
        cfg = load_config(cfg_path)
        if hasattr(args, "seed"):
            cfg.seed = args.seed
        if hasattr(args, "mode"):
            cfg.mode = args.mode
        written = COMMANDS[args.command](cfg, args, out)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WindowFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (EtfoptError, OSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error [{origin_module(exc)}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_manifest(out, cfg_path, cfg.seed, [args.command])
    log.info("wrote %d files", len(written))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
