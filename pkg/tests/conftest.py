import numpy as np
import pytest

from etfopt.market_data import ReturnPanel


def make_panel(returns, start="2020-01-01", tickers=None, kind="simple"):
    R = np.asarray(returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    dates = np.datetime64(start, "D") + np.arange(R.shape[0])
    tickers = tickers or tuple(f"A{i}" for i in range(R.shape[1]))
    return ReturnPanel(dates, tuple(tickers), R, kind)


def write_prices(path, rows, header="date,close"):
    lines = [header] + [f"{d},{p}" for d, p in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def random_moments(rng, n, scale=0.01):
    """Random PD covariance and mean vector of return-like size."""
    A = rng.normal(size=(n, n))
    cov = (A @ A.T / n + 0.2 * np.eye(n)) * scale**2
    mean = rng.normal(0.0005, 0.001, n)
    return mean, cov


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
