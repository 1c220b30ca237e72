import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from etfopt.errors import InsufficientTail, NonPositiveTailValue
from etfopt.tail import default_k_max, hill_curve, hill_estimates, tail_sample, write_hill_csv


def pareto(alpha, n, seed):
    return np.random.default_rng(seed).uniform(size=n) ** (-1.0 / alpha)


def test_hand_example():
    c = hill_estimates([8.0, 4.0, 2.0, 1.0], k_max=2)
    assert c.k_values.tolist() == [2]
    assert c.hill[0] == pytest.approx(2.0 / math.log(8.0), rel=1e-15)


def test_ties_are_well_defined():
    c = hill_estimates([5.0, 3.0, 3.0, 3.0, 1.0], k_max=3)
    # k=2: X_(3)=3 ties with X_(2), which contributes ln 1 = 0
    assert c.hill[0] == pytest.approx(2.0 / math.log(5.0 / 3.0))
    assert np.all(np.isfinite(c.hill))


def test_pareto_recovery():
    c = hill_estimates(pareto(3.0, 10_000, 1), 500)
    sel = (c.k_values >= 50) & (c.k_values <= 500)
    assert abs(c.hill[sel].mean() - 3.0) < 0.15


def test_band_brackets_and_width():
    c = hill_estimates(pareto(2.5, 5000, 2), 400)
    assert np.all(c.ci_low <= c.hill) and np.all(c.hill <= c.ci_high)
    w = (c.ci_high - c.ci_low) / c.hill * np.sqrt(c.k_values)
    assert_allclose(w, w[0], rtol=1e-12)


def test_normal_tail_grows_with_k():
    normal = np.abs(np.random.default_rng(3).standard_normal(10_000))
    a_norm = hill_estimates(normal, 500).hill[-1]
    a_par = hill_estimates(pareto(3.0, 10_000, 3), 500).hill[-1]
    assert a_norm > a_par


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_scale_invariance(c, seed):
    x = pareto(3.0, 500, seed)
    a, b = hill_estimates(x, 40), hill_estimates(c * x, 40)
    assert_allclose(a.hill, b.hill, rtol=1e-9)


def test_tails_and_errors(tmp_path):
    r = np.array([-0.03, -0.01, 0.0, 0.02, 0.05])
    assert_allclose(tail_sample(r, "loss"), [0.03, 0.01])
    assert_allclose(tail_sample(r, "gain"), [0.02, 0.05])
    with pytest.raises(ValueError):
        tail_sample(r, "both")
    with pytest.raises(NonPositiveTailValue):
        hill_estimates([1.0, 0.0, 2.0], 2)
    with pytest.raises(InsufficientTail):
        hill_curve(r, "loss", k_max=5)
    assert default_k_max(50_000) == 1000 and default_k_max(300) == 30
    curve = hill_curve(-pareto(3.0, 2000, 4))
    assert curve.k_values[-1] == 200
    write_hill_csv(tmp_path / "h.csv", curve)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "k,alpha,ci_low,ci_high" and len(lines) == 200
