import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from etfopt.errors import DegenerateX
from etfopt.robust import benchmark_panel_fit, huber_fit, write_fits_csv


def clean(seed, n=10_000, beta=1.2, sx=0.01, se=0.001):
    g = np.random.default_rng(seed)
    x = g.normal(0.0003, sx, n)
    return x, 0.0001 + beta * x + g.normal(0, se, n)


def ols(y, x):
    b, a = np.polyfit(x, y, 1)
    return a, b


def test_exact_line():
    x = np.linspace(-1, 1, 50)
    f = huber_fit(2 * x, x)
    assert f.alpha == pytest.approx(0.0, abs=1e-12)
    assert f.beta == pytest.approx(2.0, abs=1e-12)
    assert f.scale == pytest.approx(0.0, abs=1e-12)


def test_clean_data_matches_ols():
    x, y = clean(1)
    f = huber_fit(y, x)
    a, b = ols(y, x)
    assert abs(f.beta - b) < 1e-3 and abs(f.alpha - a) < 1e-3
    assert f.ci95_beta[0] <= f.beta <= f.ci95_beta[1]
    assert f.ci95_alpha[0] <= f.alpha <= f.ci95_alpha[1]


def test_outliers_hurt_ols_more():
    x, y = clean(2)
    y = y.copy()
    idx = np.random.default_rng(3).choice(y.size, y.size // 20, replace=False)
    y[idx] = 10.0
    assert abs(huber_fit(y, x).beta - 1.2) < abs(ols(y, x)[1] - 1.2)


def test_large_tuning_is_least_squares():
    x, y = clean(4, n=2000, se=0.01)
    f = huber_fit(y, x, tuning=1e6)
    a, b = ols(y, x)
    assert f.beta == pytest.approx(b, abs=1e-6)
    assert f.alpha == pytest.approx(a, abs=1e-6)


def test_self_regression():
    x = np.random.default_rng(5).standard_t(4, 500) * 0.01
    f = huber_fit(x, x)
    assert abs(f.alpha) < 1e-10 and abs(f.beta - 1.0) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.01, 0.01), st.floats(0.2, 5.0) | st.floats(-5.0, -0.2), st.integers(0, 2**32 - 1))
def test_affine_equivariance(a, b, seed):
    x, y = clean(seed, n=400, se=0.004)
    f = huber_fit(y, x)
    g = huber_fit(a + b * y, x)
    assert g.alpha == pytest.approx(a + b * f.alpha, abs=1e-8)
    assert g.beta == pytest.approx(b * f.beta, abs=1e-8)


def test_degenerate_and_short():
    with pytest.raises(DegenerateX):
        huber_fit([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        huber_fit([1.0, 2.0], [1.0, 2.0])


def test_panel_fits(tmp_path):
    g = np.random.default_rng(6)
    T = 2000
    factor = g.normal(0, 0.01, T)
    X = factor[:, None] * g.uniform(0.6, 1.4, 6) + g.normal(0, 0.01, (T, 6))
    ewp = X.mean(axis=1)
    single = X[:, 0]
    fits = benchmark_panel_fit(np.column_stack([X, ewp]), ewp, benchmark_name="EWP")
    assert len(fits) == 7
    assert fits[-1].beta == pytest.approx(1.0, abs=1e-10) and abs(fits[-1].alpha) < 1e-10
    assert len(benchmark_panel_fit(X[:, :2], ewp)) == 2
    width = lambda fs: np.mean([f.ci95_beta[1] - f.ci95_beta[0] for f in fs])
    vs_ewp = benchmark_panel_fit(X[:, 1:], ewp)
    vs_single = benchmark_panel_fit(X[:, 1:], single)
    assert width(vs_ewp) < width(vs_single)
    write_fits_csv(tmp_path / "f.csv", fits)
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "ticker,benchmark,alpha,beta,alpha_lo,alpha_hi,beta_lo,beta_hi"
