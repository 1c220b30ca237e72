"""Dynamic scenario engine.

Per asset: ARMA(1,1)-GARCH(1,1) with unit-variance Student-t innovations,
fitted by maximum likelihood.  Across assets: standardized residuals are
mapped to uniforms through their fitted t CDFs, a Student-t copula is fitted
to the uniforms, and joint next-day returns are simulated by pushing copula
draws back through the inverse marginals and the one-step forecasts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from .errors import InvalidSeedState, NonConvergence, NonPDProjectionFailure, WindowTooShort
from .kernels import ag_filter

MIN_OBS = 500
NU_LOW, NU_HIGH = 2.1, 50.0
U_CLAMP = 1e-10
MAX_PERSISTENCE = 0.9999
BOUNDARY_PERSISTENCE = 0.999
DEFAULT_SCENARIOS = 10_000


# -- Student-t helpers -------------------------------------------------------------

def student_t_pdf(x, nu):
    """Standard Student-t density with ``nu`` degrees of freedom."""
    x = np.asarray(x, dtype=float)
    logc = special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu) - 0.5 * np.log(nu * np.pi)
    return np.exp(logc - 0.5 * (nu + 1) * np.log1p(x * x / nu))


def _t_scale(nu):
    return math.sqrt(nu / (nu - 2.0))


def standardized_t(rng, nu, size):
    """Unit-variance Student-t draws."""
    return rng.standard_t(nu, size) / _t_scale(nu)


# -- AG model -----------------------------------------------------------------------

@dataclass(frozen=True)
class AGParams:
    delta0: float
    ar1: float
    ma1: float
    alpha0: float
    alpha1: float
    beta1: float
    nu: float
    loglik: float = float("nan")

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0 or self.alpha1 + self.beta1 >= 1:
            raise ValueError("need alpha1, beta1 >= 0 and alpha1 + beta1 < 1")
        if not abs(self.ar1) < 1:
            raise ValueError("|ar1| must be below 1")
        if not self.nu > 2:
            raise ValueError("nu must exceed 2")

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1

    def as_tuple(self):
        return (self.delta0, self.ar1, self.ma1, self.alpha0, self.alpha1, self.beta1, self.nu)


@dataclass(frozen=True)
class AGFitState:
    params: AGParams
    std_residuals: np.ndarray
    sigma_forecast: float
    mean_forecast: float
    converged: bool = True
    boundary: bool = False  # alpha1 + beta1 above BOUNDARY_PERSISTENCE
    nu_at_bound: bool = False
    sigma2: Optional[np.ndarray] = field(default=None, repr=False)


def ag_loglik(params, returns, sigma2_0=None) -> float:
    r = np.asarray(returns, dtype=float)
    s0 = float(np.var(r, ddof=1)) if sigma2_0 is None else sigma2_0
    p = params.as_tuple() if isinstance(params, AGParams) else params
    return ag_filter(r, *p, s0)[2]


def simulate_ag(params: AGParams, n: int, seed: int = 0, burn: int = 500) -> np.ndarray:
    """Sample path of the AG model (``burn`` warm-up steps discarded)."""
    rng = np.random.default_rng(seed)
    d0, d1, th, om, a1, b1, nu = params.as_tuple()
    eps = standardized_t(rng, nu, n + burn)
    s2 = om / (1.0 - a1 - b1)
    r_prev = d0 / (1.0 - d1)
    a_prev = 0.0
    out = np.empty(n + burn)
    for t in range(n + burn):
        s2 = om + a1 * a_prev * a_prev + b1 * s2
        a = math.sqrt(s2) * eps[t]
        r = d0 + d1 * r_prev + a + th * a_prev
        out[t] = r
        r_prev, a_prev = r, a
    return out[burn:]


def _logistic(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _logit(p):
    return math.log(p / (1.0 - p))


def _unpack(x):
    """Unconstrained vector -> (d0, ar1, ma1, omega, alpha1, beta1, nu) on standardized data."""
    pers = MAX_PERSISTENCE * _logistic(x[4])
    share = _logistic(x[5])
    nu = NU_LOW + (NU_HIGH - NU_LOW) * _logistic(x[6])
    return (x[0], math.tanh(x[1]), math.tanh(x[2]), math.exp(x[3]), pers * share, pers * (1.0 - share), nu)


def _pack(d0, ar1, ma1, omega, alpha1, beta1, nu):
    pers = min(max(alpha1 + beta1, 1e-6), MAX_PERSISTENCE * (1 - 1e-9))
    share = min(max(alpha1 / pers, 1e-6), 1 - 1e-6)
    nu = min(max(nu, NU_LOW + 1e-6), NU_HIGH - 1e-6)
    clip = lambda v: min(max(v, -0.999), 0.999)
    return np.array([
        d0,
        math.atanh(clip(ar1)),
        math.atanh(clip(ma1)),
        math.log(max(omega, 1e-12)),
        _logit(pers / MAX_PERSISTENCE),
        _logit(share),
        _logit((nu - NU_LOW) / (NU_HIGH - NU_LOW)),
    ])


def _nelder_mead(fun, x0, max_evals):
    res = optimize.minimize(fun, x0, method="Nelder-Mead",
                            options={"maxfev": max_evals, "xatol": 1e-5, "fatol": 1e-6, "adaptive": True})
    return res


def fit_ag(returns, n_starts: int = 8, start: Optional[AGParams] = None, seed: int = 0,
           max_evals: int = 4000) -> AGFitState:
    """Maximum-likelihood AG fit by multi-start Nelder-Mead.

    The search runs on returns divided by their standard deviation, over an
    unconstrained reparametrization that keeps every candidate stationary
    and invertible.  ``start`` (e.g. yesterday's estimate) becomes the first
    start; the remaining ``n_starts - 1`` are jittered copies.  The best
    simplex result is polished by one restart.
    """
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < MIN_OBS:
        raise WindowTooShort(f"AG fit needs at least {MIN_OBS} observations, got {r.size}")
    sd = float(np.std(r, ddof=1))
    if not np.isfinite(sd) or not sd > 1e-12 * float(np.abs(r).max()):
        raise NonConvergence("return series has zero variance; AG model is not identified")
    z = r / sd
    s0 = float(np.var(z, ddof=1))

    def nll(x):
        try:
            p = _unpack(x)
        except (OverflowError, ValueError):
            return 1e300
        ll = ag_filter(z, *p, s0)[2]
        return -ll if np.isfinite(ll) else 1e300

    if start is not None:
        x_first = _pack(start.delta0 / sd, start.ar1, start.ma1, start.alpha0 / sd**2,
                        start.alpha1, start.beta1, start.nu)
    else:
        x_first = _pack(float(z.mean()), 0.0, 0.0, 0.05 * s0, 0.05, 0.90, 8.0)
    rng = np.random.default_rng(seed)
    starts = [x_first] + [x_first + rng.normal(0.0, 0.5, 7) for _ in range(max(n_starts, 1) - 1)]

    best = None
    for x0 in starts:
        res = _nelder_mead(nll, x0, max_evals)
        if best is None or res.fun < best.fun:
            best = res
    polished = _nelder_mead(nll, best.x, max_evals)
    converged = bool(best.success or polished.success)
    if polished.fun <= best.fun:
        best = polished
    if not np.isfinite(best.fun) or best.fun >= 1e300:
        raise NonConvergence("no finite likelihood found")

    d0, d1, th, om, a1, b1, nu = _unpack(best.x)
    # back to return units
    d0 *= sd
    om *= sd * sd
    a, s2, ll = ag_filter(r, d0, d1, th, om, a1, b1, nu, sd * sd)
    params = AGParams(d0, d1, th, om, a1, b1, nu, ll)
    return _state_from(params, r, a, s2, converged)


def _state_from(params: AGParams, r, a, s2, converged=True) -> AGFitState:
    eps = a / np.sqrt(s2)
    eps[0] = 0.0
    s2_next = params.alpha0 + params.alpha1 * a[-1] ** 2 + params.beta1 * s2[-1]
    mean_next = params.delta0 + params.ar1 * r[-1] + params.ma1 * a[-1]
    return AGFitState(
        params=params,
        std_residuals=eps,
        sigma_forecast=float(math.sqrt(s2_next)),
        mean_forecast=float(mean_next),
        converged=converged,
        boundary=params.persistence > BOUNDARY_PERSISTENCE,
        nu_at_bound=params.nu > NU_HIGH - 0.05 * (NU_HIGH - NU_LOW),
        sigma2=s2,
    )


def filter_ag(params: AGParams, returns) -> AGFitState:
    """Re-run fixed parameters over a new window (no re-estimation)."""
    r = np.asarray(returns, dtype=float).ravel()
    s0 = float(np.var(r, ddof=1))
    a, s2, ll = ag_filter(r, *params.as_tuple(), s0)
    if not np.isfinite(ll):
        raise NonConvergence("fixed parameters give a degenerate filter on this window")
    return _state_from(replace(params, loglik=ll), r, a, s2)


# -- copula -------------------------------------------------------------------------

@dataclass(frozen=True)
class TCopula:
    corr: np.ndarray
    df: float


def copula_transform(state: AGFitState) -> np.ndarray:
    """Standardized residuals -> uniforms through the fitted t marginal."""
    nu = state.params.nu
    u = special.stdtr(nu, np.asarray(state.std_residuals) * _t_scale(nu))
    return np.clip(u, U_CLAMP, 1.0 - U_CLAMP)


def inverse_transform(u, nu: float) -> np.ndarray:
    """Uniforms -> unit-variance t innovations (inverse of :func:`copula_transform`)."""
    return special.stdtrit(nu, np.asarray(u, dtype=float)) / _t_scale(nu)


def nearest_correlation(A, max_iter: int = 200, tol: float = 1e-12, floor: float = 1e-8) -> np.ndarray:
    """Nearest correlation matrix by alternating projections with Dykstra's correction."""
    Y = 0.5 * (np.asarray(A, dtype=float) + np.asarray(A, dtype=float).T)
    n = Y.shape[0]
    dS = np.zeros_like(Y)
    X = Y.copy()
    for _ in range(max_iter):
        R = Y - dS
        w, V = np.linalg.eigh(R)
        X = (V * np.maximum(w, floor)) @ V.T
        dS = X - R
        Y_new = X.copy()
        np.fill_diagonal(Y_new, 1.0)
        if np.linalg.norm(Y_new - Y, "fro") < tol * max(1.0, np.linalg.norm(Y, "fro")):
            Y = Y_new
            break
        Y = Y_new
    # final polish: strictly PD with unit diagonal
    w, V = np.linalg.eigh(0.5 * (Y + Y.T))
    Y = (V * np.maximum(w, floor)) @ V.T
    d = np.sqrt(np.diag(Y))
    Y = Y / np.outer(d, d)
    np.fill_diagonal(Y, 1.0)
    return Y


def kendall_matrix(U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    n = U.shape[1]
    tau = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            t = stats.kendalltau(U[:, i], U[:, j]).statistic
            tau[i, j] = tau[j, i] = 0.0 if not np.isfinite(t) else t
    return tau


def t_copula_loglik(U, corr, df) -> float:
    """Log-likelihood of uniforms under a t copula."""
    U = np.asarray(U, dtype=float)
    n = U.shape[1]
    x = special.stdtrit(df, U)
    L = np.linalg.cholesky(corr)
    y = np.linalg.solve(L, x.T)
    q = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    joint = (special.gammaln(0.5 * (df + n)) - special.gammaln(0.5 * df) - 0.5 * n * np.log(df * np.pi)
             - 0.5 * logdet - 0.5 * (df + n) * np.log1p(q / df))
    marg = (special.gammaln(0.5 * (df + 1)) - special.gammaln(0.5 * df) - 0.5 * np.log(df * np.pi)
            - 0.5 * (df + 1) * np.log1p(x * x / df)).sum(axis=1)
    return float(np.sum(joint - marg))


def fit_copula(U, df_bounds=(NU_LOW, NU_HIGH), min_obs: int = MIN_OBS) -> TCopula:
    """Student-t copula: Kendall-tau correlation plus profile-likelihood degrees of freedom."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2:
        raise ValueError("uniforms must be a T x N matrix")
    if U.shape[0] < min_obs:
        raise WindowTooShort(f"copula fit needs at least {min_obs} rows, got {U.shape[0]}")
    if np.any(~((U > 0) & (U < 1))):
        raise ValueError("uniforms must lie strictly inside (0, 1)")
    rho = np.sin(0.5 * np.pi * kendall_matrix(U))
    corr = nearest_correlation(rho)
    cap = 1.0 - 1e-8
    off = ~np.eye(corr.shape[0], dtype=bool)
    corr[off] = np.clip(corr[off], -cap, cap)
    try:
        np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        corr = nearest_correlation(corr, floor=1e-6)
        try:
            np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise NonPDProjectionFailure("could not project Kendall correlation to PD") from None
    if corr.shape[0] == 1:
        return TCopula(corr, float(df_bounds[1]))
    res = optimize.minimize_scalar(lambda d: -t_copula_loglik(U, corr, d), bounds=df_bounds,
                                   method="bounded", options={"xatol": 1e-3})
    return TCopula(corr, float(res.x))


# -- scenarios ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSet:
    draws: np.ndarray
    source_window_end: object = None
    seed: int = 0
    tickers: tuple = ()


def copula_uniforms(copula: TCopula, s: int, seed: int) -> np.ndarray:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidSeedState(f"seed must be a non-negative integer, got {seed!r}")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    L = np.linalg.cholesky(copula.corr)
    g = rng.standard_normal((s, L.shape[0])) @ L.T
    w = rng.chisquare(copula.df, s) / copula.df
    return np.clip(special.stdtr(copula.df, g / np.sqrt(w)[:, None]), U_CLAMP, 1.0 - U_CLAMP)


def simulate_scenarios(copula: TCopula, states: Sequence[AGFitState], s: int = DEFAULT_SCENARIOS,
                       seed: int = 0, window_end=None, tickers=()) -> ScenarioSet:
    """Joint next-day returns: copula draws -> t innovations -> AG one-step forecasts."""
    if s < 1000:
        raise ValueError("scenario count must be at least 1000")
    if len(states) != copula.corr.shape[0]:
        raise ValueError("one AG state per copula dimension is required")
    U = copula_uniforms(copula, s, seed)
    draws = np.empty_like(U)
    for i, st in enumerate(states):
        eps = inverse_transform(U[:, i], st.params.nu)
        draws[:, i] = st.mean_forecast + st.sigma_forecast * eps
    if not np.all(np.isfinite(draws)):
        raise InvalidSeedState("non-finite scenario draws")
    return ScenarioSet(draws, window_end, int(seed), tuple(tickers))


def write_params_csv(path, rows) -> None:
    """``rows``: iterable of (window_end, ticker, AGParams); appends a header if new."""
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        if new:
            out.writerow(["window_end", "ticker", "delta0", "ar1", "ma1", "alpha0", "alpha1", "beta1", "nu", "loglik"])
        for end, ticker, p in rows:
            out.writerow([str(end), ticker, *(repr(float(v)) for v in (*p.as_tuple(), p.loglik))])
