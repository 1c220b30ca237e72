"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The public names (``ag_filter``, ``max_drawdown_path``, ``compound``) are
bound to one implementation at import time according to
:mod:`etfopt._accel`.  Both variants stay importable under a ``_jit`` /
``_numpy`` suffix so tests and the benchmark can compare them directly.
"""
import math

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from ._accel import HAVE_NUMBA, USE_NUMBA, jit


# -- ARMA(1,1)-GARCH(1,1) filter with standardized Student-t log-likelihood ----

def _ag_filter_loop(r, d0, d1, th, omega, a1, b1, nu, sigma2_0):
    n = r.shape[0]
    a = np.zeros(n)
    s2 = np.empty(n)
    s2[0] = sigma2_0
    if not (nu > 2.0 and omega > 0.0):
        return a, s2, -np.inf
    const = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(math.pi * (nu - 2.0))
    half_nu1 = 0.5 * (nu + 1.0)
    nm2 = nu - 2.0
    ll = 0.0
    for t in range(1, n):
        s2_t = omega + a1 * a[t - 1] * a[t - 1] + b1 * s2[t - 1]
        s2[t] = s2_t
        a_t = r[t] - d0 - d1 * r[t - 1] - th * a[t - 1]
        a[t] = a_t
        if not (s2_t > 0.0) or not math.isfinite(a_t):
            return a, s2, -np.inf
        ll += const - 0.5 * math.log(s2_t) - half_nu1 * math.log1p(a_t * a_t / (s2_t * nm2))
    if not math.isfinite(ll):
        return a, s2, -np.inf
    return a, s2, ll


def _ag_filter_numpy(r, d0, d1, th, omega, a1, b1, nu, sigma2_0):
    n = r.shape[0]
    a = np.zeros(n)
    s2 = np.empty(n)
    s2[0] = sigma2_0
    if not (nu > 2.0 and omega > 0.0):
        return a, s2, -np.inf
    if n > 1:
        y = r[1:] - d0 - d1 * r[:-1]
        a[1:] = lfilter([1.0], [1.0, th], y)
        x = omega + a1 * a[:-1] ** 2
        s2[1:], _ = lfilter([1.0], [1.0, -b1], x, zi=[b1 * sigma2_0])
    s2t = s2[1:]
    at = a[1:]
    if not (np.all(s2t > 0.0) and np.all(np.isfinite(at))):
        return a, s2, -np.inf
    const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * np.log(np.pi * (nu - 2.0))
    ll = np.sum(const - 0.5 * np.log(s2t) - 0.5 * (nu + 1.0) * np.log1p(at * at / (s2t * (nu - 2.0))))
    if not np.isfinite(ll):
        return a, s2, -np.inf
    return a, s2, float(ll)


# -- drawdown and compounding ---------------------------------------------------

def _max_drawdown_loop(prices):
    peak = prices[0]
    worst = 0.0
    for p in prices:
        if p > peak:
            peak = p
        dd = (peak - p) / peak
        if dd > worst:
            worst = dd
    return worst


def _max_drawdown_numpy(prices):
    peak = np.maximum.accumulate(prices)
    return float(np.max((peak - prices) / peak))


def _compound_loop(growth, initial):
    out = np.empty(growth.shape[0])
    v = initial
    for t in range(growth.shape[0]):
        v = v * (1.0 + growth[t])
        out[t] = v
    return out


def _compound_numpy(growth, initial):
    return initial * np.cumprod(1.0 + growth)


if HAVE_NUMBA:
    _ag_filter_jit = jit(_ag_filter_loop)
    _max_drawdown_jit = jit(_max_drawdown_loop)
    _compound_jit = jit(_compound_loop)
else:  # pragma: no cover
    _ag_filter_jit = _ag_filter_loop
    _max_drawdown_jit = _max_drawdown_loop
    _compound_jit = _compound_loop


if USE_NUMBA:
    _ag_filter_impl = _ag_filter_jit
    _max_drawdown_impl = _max_drawdown_jit
    _compound_impl = _compound_jit
else:
    _ag_filter_impl = _ag_filter_numpy
    _max_drawdown_impl = _max_drawdown_numpy
    _compound_impl = _compound_numpy


def ag_filter(r, d0, d1, th, omega, a1, b1, nu, sigma2_0):
    """Run the ARMA-GARCH recursion over ``r``.

    Returns ``(shocks, conditional_variances, loglik)``.  The recursion starts
    from a zero shock and ``sigma2_0``; the first observation is conditioned
    on and contributes nothing to the likelihood.  ``loglik`` is ``-inf`` for
    parameter sets that produce a non-positive variance.
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    return _ag_filter_impl(r, float(d0), float(d1), float(th), float(omega),
                           float(a1), float(b1), float(nu), float(sigma2_0))


def max_drawdown_path(prices):
    prices = np.ascontiguousarray(prices, dtype=np.float64)
    return float(_max_drawdown_impl(prices))


def compound(growth, initial):
    """Value path ``V_t = V_{t-1} (1 + g_t)`` starting from ``initial`` (not included)."""
    growth = np.ascontiguousarray(growth, dtype=np.float64)
    return _compound_impl(growth, float(initial))
