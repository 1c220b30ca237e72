import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from etfopt import metrics as M
from etfopt.errors import (
    DegenerateBenchmark,
    EmptySeries,
    NoDownside,
    TooFewObservations,
    ZeroDrawdown,
    ZeroVolatility,
)

returns_strategy = st.lists(st.floats(-0.2, 0.2, allow_nan=False), min_size=100, max_size=400)


def test_sharpe_examples():
    with pytest.raises(ZeroVolatility):
        M.sharpe(np.full(10, 0.01))
    assert M.sharpe([0.01, -0.01]) == 0.0
    r = np.array([0.01, 0.03, -0.02, 0.005])
    assert M.sharpe(r, 0.001) == pytest.approx((r - 0.001).mean() / (r - 0.001).std(ddof=1))


def test_max_drawdown_examples():
    assert M.max_drawdown(np.arange(1.0, 20.0)) == 0.0
    assert M.max_drawdown([100, 50, 75]) == 0.5
    with pytest.raises(EmptySeries):
        M.max_drawdown([])


def test_calmar_examples():
    # 252 steps: 100 -> 50 halfway, then up to 200: CAGR 1.0, drawdown 0.5
    p = np.concatenate([np.linspace(100, 50, 127), np.linspace(50, 200, 127)[1:]])
    assert len(p) == 253
    r = p[1:] / p[:-1] - 1
    assert M.calmar(r, p) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ZeroDrawdown):
        M.calmar(np.zeros(252), np.full(253, 100.0))
    with pytest.raises(TooFewObservations):
        M.calmar(r[:100], p[:101])


def test_var_examples():
    r = np.array([-0.05] * 5 + [0.01] * 95)
    # type-7 quantile: position 0.05*(n-1) = 4.95 between -0.05 and 0.01
    assert M.var(r, 0.95) == pytest.approx(-0.05 + 0.95 * 0.06, abs=1e-15)
    assert M.cvar(r, 0.95) == pytest.approx(-0.05, abs=1e-15)
    alt = np.tile([0.01, -0.01], 50)
    assert M.var(alt, 0.95) == pytest.approx(-0.01)
    with pytest.raises(TooFewObservations):
        M.var(np.zeros(10), 0.95)


def test_cvar_examples():
    assert M.cvar(np.full(100, -0.01), 0.95) == pytest.approx(-0.01)
    r = np.array([-0.10, -0.02] + [0.01] * 98)
    assert M.cvar(r, 0.98) == pytest.approx(-0.06)


def test_cvar_fractional_boundary():
    # 0.05 * 30 = 1.5 worst observations: full weight on the worst, half on the next
    r = np.arange(30, dtype=float)
    assert M.cvar(r, 0.95) == pytest.approx((0 + 0.5 * 1) / 1.5)


def test_starr_examples():
    r = np.array([-0.02] * 5 + [0.0] * 94 + [0.2])
    assert M.cvar(r, 0.95) == pytest.approx(-0.02)
    assert M.starr(r, 0.0) == pytest.approx(0.001 / 0.02)
    z = np.array([-0.02] * 5 + [0.02] * 5 + [0.0] * 90)
    assert M.starr(z, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_rachev_examples():
    g = np.random.default_rng(11)
    sym = g.standard_t(5, 10_000)
    assert M.rachev(sym) == pytest.approx(1.0, abs=0.08)
    skew = np.array([0.001] * 15 + [0.02, 0.03, 0.05, 0.08, 0.12])
    assert skew.min() > 0
    # CVaR95 of -returns over 20 points is the single best return; the loss tail is the single worst
    assert M.rachev(skew) == pytest.approx(0.12 / 0.001)
    assert M.rachev(skew) > 1


def test_sortino_examples():
    assert M.sortino([0.01, -0.01]) == 0.0
    with pytest.raises(NoDownside):
        M.sortino([0.01, 0.02, 0.0])
    ex = np.array([0.02, -0.01, 0.005, -0.03])
    dd = np.sqrt(np.mean(np.minimum(ex, 0) ** 2))
    assert M.sortino(ex) == pytest.approx(ex.mean() / dd)


def test_jensens_alpha_examples(rng):
    b = rng.normal(0.0005, 0.01, 300)
    rf = np.full(300, 1e-4)
    a, beta = M.regression_alpha_beta(b, b, rf)
    assert abs(a) < 1e-12 and beta == pytest.approx(1.0, abs=1e-12)
    assert M.jensens_alpha(b + 0.0001, b, rf) == pytest.approx(0.0001, abs=1e-12)
    with pytest.raises(DegenerateBenchmark):
        M.jensens_alpha(b, np.full(300, 0.001), rf)
    with pytest.raises(TooFewObservations):
        M.jensens_alpha(b[:10], b[:10])


@settings(max_examples=200, deadline=None)
@given(returns_strategy, st.floats(0.5, 0.995))
def test_tail_ordering(r, c):
    r = np.array(r)
    if r.size < np.ceil(1 / (1 - c)):
        return
    assert M.cvar(r, c) <= M.var(r, c) + 1e-15
    if r.size >= 100:
        assert M.cvar(r, 0.99) <= M.cvar(r, 0.95) + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.01, 0.01), st.floats(0.1, 20.0))
def test_shift_and_scale_invariance(seed, shift, k):
    g = np.random.default_rng(seed)
    r = g.normal(0.0003, 0.01, 300)
    rf = np.full(300, 5e-5)
    assert M.sharpe(r + shift, rf + shift) == pytest.approx(M.sharpe(r, rf), rel=1e-8, abs=1e-12)
    assert M.sortino(r + shift, rf + shift) == pytest.approx(M.sortino(r, rf), rel=1e-8, abs=1e-12)
    for fn in (M.sharpe, M.sortino, M.starr):
        assert fn(k * r, k * rf) == pytest.approx(fn(r, rf), rel=1e-9, abs=1e-12)
    assert M.rachev(k * r) == pytest.approx(M.rachev(r), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_drawdown_scale_invariant(seed, k):
    p = 100 * np.cumprod(1 + np.random.default_rng(seed).normal(0, 0.02, 200))
    assert M.max_drawdown(k * p) == pytest.approx(M.max_drawdown(p), rel=1e-12, abs=1e-15)
    assert 0.0 <= M.max_drawdown(p) <= 1.0


def test_ratio_report_and_csv(tmp_path, rng):
    r = rng.normal(0.0004, 0.01, 600)
    p = 100 * np.concatenate([[1.0], np.cumprod(1 + r)])
    rep = M.ratio_report(r, p, 1e-5, benchmark=r)
    assert rep.n_obs == 600
    assert rep.cvar95 <= rep.var95 and rep.cvar99 <= rep.var99
    assert abs(rep.jensens_alpha) < 1e-12
    assert np.isnan(M.ratio_report(r, p).jensens_alpha)
    M.write_ratio_csv(tmp_path / "r.csv", {"X": rep})
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "portfolio,metric,value"
    assert len(lines) == 1 + len(M.METRIC_NAMES)
    sharpe_row = [ln for ln in lines if ",sharpe," in ln][0]
    assert_allclose(float(sharpe_row.split(",")[2]), rep.sharpe, rtol=0)
