"""Portfolio optimization toolkit: mean-variance and CVaR strategies, rolling
backtests with historical or AG/t-copula scenarios, risk ratios, tail and
robust-regression diagnostics."""

__version__ = "0.1.0"
