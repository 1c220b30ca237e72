import json
import textwrap

import numpy as np
import pytest

from etfopt.cli import main
from etfopt.market_data import read_panel_csv
from etfopt.synthetic import write_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_dataset(root / "prices", n_assets=3, n_days=320, seed=5)
    ini = root / "toy.ini"
    ini.write_text(textwrap.dedent("""\
        [data]
        manifest = prices/manifest.txt
        riskfree = prices/riskfree.csv
        focus_ticker = SYN01
        [backtest]
        window_length = 300
        scenario_count = 1000
        [tail]
        pairs = EWP, SYN01
        [regression]
        benchmarks = EWP, SYN01
        [frontier]
        points = 20
        """), encoding="utf-8")
    return root, ini


def run(ini, out, *args):
    return main(["--config", str(ini), "--out", str(out), *args])


def test_full_pipeline(dataset, tmp_path, capsys):
    root, ini = dataset
    out = tmp_path / "o"
    assert run(ini, out, "ingest") == 0
    panel = read_panel_csv(out / "panel.csv")
    assert panel.N == 3 and panel.T == 320
    assert run(ini, out, "backtest") == 0
    hist = out / "historical"
    assert len(list(hist.glob("returns_*.csv"))) == 13
    assert (hist / "ratios.csv").read_text().startswith("portfolio,metric,value\n")
    for name in ("cumulative_price_LO.svg", "cumulative_price_LS.svg", "warnings.csv"):
        assert (hist / name).exists()
    assert run(ini, out, "frontier") == 0
    assert (out / "frontier" / "frontier.csv").exists() and (out / "frontier" / "frontier.svg").exists()
    assert run(ini, out, "diagnose") == 0
    diag = out / "diagnose"
    assert {p.name for p in diag.glob("hill_*.csv")} == {"hill_EWP.csv", "hill_SYN01.csv"}
    assert {p.name for p in diag.glob("regression_vs_*.csv")} == {"regression_vs_EWP.csv", "regression_vs_SYN01.csv"}
    capsys.readouterr()
    assert run(ini, out, "report") == 0
    text = capsys.readouterr().out
    assert "reference cells within tolerance" in text
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["commands_run"] == ["report"] and manifest["output_dir"] == "."
    for svg in out.rglob("*.svg"):
        assert str(tmp_path) not in svg.read_text()


def test_ingest_is_byte_stable(dataset, tmp_path):
    _, ini = dataset
    assert run(ini, tmp_path / "a", "ingest") == 0
    assert run(ini, tmp_path / "b", "ingest") == 0
    assert (tmp_path / "a" / "panel.csv").read_bytes() == (tmp_path / "b" / "panel.csv").read_bytes()


def test_single_strategy_backtest_and_rerun(dataset, tmp_path):
    root, _ = dataset
    ini = tmp_path / "ewp.ini"
    ini.write_text(f"[data]\nmanifest = {root / 'prices' / 'manifest.txt'}\n"
                   "[backtest]\nwindow_length = 300\nstrategies = EWP\n", encoding="utf-8")
    for d in ("a", "b"):
        assert run(ini, tmp_path / d, "ingest") == 0
        assert run(ini, tmp_path / d, "backtest", "--seed", "3") == 0
    files = sorted(p.name for p in (tmp_path / "a" / "historical").glob("returns_*.csv"))
    assert files == ["returns_EWP.csv"]
    for p in (tmp_path / "a").rglob("*"):
        if p.is_file():
            twin = tmp_path / "b" / p.relative_to(tmp_path / "a")
            assert p.read_bytes() == twin.read_bytes(), p.name


def test_exit_codes(tmp_path, dataset):
    _, ini = dataset
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing here\n")
    cfg = tmp_path / "e.ini"
    cfg.write_text(f"[data]\nmanifest = {empty}\n")
    assert run(cfg, tmp_path / "o", "ingest") == 2
    assert main([]) == 2
    assert main(["bogus"]) == 2
    assert run(tmp_path / "missing.ini", tmp_path / "o", "ingest") == 2
    assert run(ini, tmp_path / "fresh", "backtest") == 2  # no panel yet
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "X.csv").write_text("date,close\n2020-01-01,1\n2020-01-02,-3\n")
    (bad / "m.txt").write_text("X = X.csv\n")
    cfg2 = tmp_path / "b.ini"
    cfg2.write_text(f"[data]\nmanifest = {bad / 'm.txt'}\n")
    assert run(cfg2, tmp_path / "o2", "ingest") == 3


def test_runtime_failure_names_module(dataset, tmp_path, capsys, monkeypatch):
    _, ini = dataset
    out = tmp_path / "o"
    assert run(ini, out, "ingest") == 0
    import etfopt.backtest as bt

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(bt.mv, "min_variance_portfolio", boom)
    capsys.readouterr()
    assert main(["--config", str(ini), "--out", str(out), "backtest"]) == 3
    err = capsys.readouterr().err
    assert "solver exploded" in err and "window ending" in err
