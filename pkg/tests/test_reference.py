import math

from etfopt import reference as ref
from etfopt.portfolio import ALL_LABELS


def _table(scale=1.0):
    return {label: {m: v[label] * scale for m, v in ref.REFERENCE.items()} for label in ALL_LABELS}


def test_reference_covers_every_cell():
    for metric, values in ref.REFERENCE.items():
        assert set(values) == set(ALL_LABELS), metric


def test_exact_values_pass_and_far_values_diverge():
    checks = ref.check_cells(_table())
    assert all(c.passed for c in checks)
    assert len(checks) == len(ref.REFERENCE) * 13
    off = ref.check_cells(_table(1.5))
    assert not any(c.passed for c in off)
    lines = ref.format_report(off)
    assert lines[-1].startswith("0/")
    assert all(line.startswith("DIVERGES") for line in lines[:-1])


def test_rachev_compared_by_magnitude():
    t = _table()
    for label in ALL_LABELS:
        t[label]["rachev"] = abs(t[label]["rachev"])
    assert all(c.passed for c in ref.check_cells(t) if c.metric == "rachev")


def test_missing_values_diverge():
    checks = ref.check_cells({})
    assert not any(c.passed for c in checks)
    assert all(math.isinf(c.rel_error) for c in checks)


def test_sharpe_ranking():
    assert ref.sharpe_ranking_matches(_table())
    t = _table()
    t["LO_C95"]["sharpe"], t["LS_TVP"]["sharpe"] = t["LS_TVP"]["sharpe"], t["LO_C95"]["sharpe"]
    assert not ref.sharpe_ranking_matches(t)


def test_checks_csv(tmp_path):
    ref.write_checks_csv(tmp_path / "c.csv", ref.check_cells(_table()))
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "metric,strategy,reference,computed,status"
    assert len(lines) == 1 + len(ref.REFERENCE) * 13
