"""Scenario CVaR portfolios: minimum-CVaR and maximum-STARR (tangency-CVaR).

Both are linear programs in the Rockafellar-Uryasev form::

    min  zeta + 1/((1-c) S) * sum_s u_s
    s.t. u_s >= -r_s'w - zeta,  u_s >= 0,  sum(w) = 1,  regime bounds

solved with HiGHS dual simplex.  CVaR here is a positive loss number; the
metrics module reports the same quantity as a signed (negative) return.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import Infeasible, NoTangency, SolverFailure, UnboundedDescent
from .metrics import tail_mean
from .portfolio import LONG_ONLY, LONG_SHORT, WeightVector

MIN_SCENARIOS = 50
DEFAULT_BOX = 1.0
RATIO_TOL = 1e-9


@dataclass(frozen=True)
class CvarProblem:
    scenarios: np.ndarray
    confidence: float = 0.95
    rf_daily: float = 0.0
    regime: str = LONG_ONLY
    bound: float = DEFAULT_BOX
    tickers: tuple = ()

    def __post_init__(self):
        R = np.asarray(self.scenarios, dtype=float)
        if R.ndim == 1:
            R = R[:, None]
        object.__setattr__(self, "scenarios", R)
        if not self.tickers:
            object.__setattr__(self, "tickers", tuple(f"A{i}" for i in range(R.shape[1])))
        if R.shape[0] < MIN_SCENARIOS:
            raise ValueError(f"need at least {MIN_SCENARIOS} scenarios, got {R.shape[0]}")
        if not np.all(np.isfinite(R)):
            raise ValueError("scenarios must be finite")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.regime not in (LONG_ONLY, LONG_SHORT):
            raise ValueError(f"unknown regime {self.regime!r}")

    @property
    def S(self) -> int:
        return self.scenarios.shape[0]

    @property
    def N(self) -> int:
        return self.scenarios.shape[1]


@dataclass(frozen=True)
class CvarSolution:
    weights: WeightVector
    cvar: float  # expected tail loss (positive = loss)
    var: float  # loss quantile from the LP's zeta
    ratio: float = float("nan")  # STARR for tangency solutions
    lp_solves: int = 1


def tail_loss(port_returns, confidence: float) -> float:
    """Expected loss beyond the ``confidence`` quantile (the LP objective for fixed weights)."""
    return -tail_mean(port_returns, 1.0 - confidence)


def _lp_blocks(R):
    S, N = R.shape
    return sparse.hstack(
        [sparse.csr_matrix(-R), sparse.csr_matrix(-np.ones((S, 1))), -sparse.identity(S, format="csr")],
        format="csr",
    )


def _weight_bounds(p: CvarProblem):
    if p.regime == LONG_ONLY:
        return [(0.0, None)] * p.N
    if not np.isfinite(p.bound):
        return [(None, None)] * p.N
    return [(-p.bound, p.bound)] * p.N


def _run_lp(c, A_ub, b_ub, A_eq, b_eq, bounds, what):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds")
    if res.status == 2:
        raise Infeasible(f"{what}: infeasible ({res.message})")
    if res.status == 3:
        raise UnboundedDescent(f"{what}: unbounded; long-short problems need finite weight bounds")
    if res.status != 0:
        raise SolverFailure(f"{what}: {res.message}", iterations=getattr(res, "nit", None))
    return res


def _finish(p: CvarProblem, w):
    if p.regime == LONG_ONLY:
        w = np.where(w < 0.0, 0.0, w)
    else:
        w = np.clip(w, -p.bound, p.bound)
    w = w / w.sum()
    gross = max(p.bound, DEFAULT_BOX) if np.isfinite(p.bound) else np.inf
    return WeightVector(p.tickers, w, p.regime, gross)


def _weighted_cvar_lp(p: CvarProblem, risk_weight: float, mean_weight: float, blocks=None):
    """min risk_weight * CVaR(w) - mean_weight * mean(R w) over the feasible weights."""
    S, N = p.S, p.N
    k = 1.0 / ((1.0 - p.confidence) * S)
    mu = p.scenarios.mean(axis=0)
    c = np.concatenate([-mean_weight * mu, [risk_weight], np.full(S, risk_weight * k)])
    A_ub = _lp_blocks(p.scenarios) if blocks is None else blocks
    A_eq = np.concatenate([np.ones(N), np.zeros(S + 1)])[None, :]
    bounds = _weight_bounds(p) + [(None, None)] + [(0.0, None)] * S
    res = _run_lp(c, A_ub, np.zeros(S), A_eq, [1.0], bounds, "CVaR LP")
    return res.x[:N], float(res.x[N]), res


class ScipyBackend:
    """One-shot LPs through ``scipy.optimize.linprog``; stateless."""

    def weighted(self, p: CvarProblem, risk_weight: float, mean_weight: float, blocks=None):
        w, zeta, res = _weighted_cvar_lp(p, risk_weight, mean_weight, blocks)
        return w, zeta, float(res.fun)

    def homogenized(self, p: CvarProblem, blocks=None):
        return _homogenized_lp(p, _lp_blocks(p.scenarios) if blocks is None else blocks)


def min_cvar(p: CvarProblem, backend=None) -> CvarSolution:
    backend = backend or ScipyBackend()
    w, zeta, _ = backend.weighted(p, 1.0, 0.0)
    wv = _finish(p, w)
    return CvarSolution(wv, tail_loss(p.scenarios @ wv.weights, p.confidence), zeta, lp_solves=1)


def min_cvar_portfolio(p: CvarProblem, backend=None) -> WeightVector:
    """Weights minimizing scenario CVaR at ``p.confidence``."""
    if p.N == 1:
        return WeightVector(p.tickers, np.ones(1), p.regime)
    return min_cvar(p, backend).weights


def starr_of(p: CvarProblem, w) -> float:
    w = np.asarray(getattr(w, "weights", w), dtype=float)
    port = p.scenarios @ w
    return float((port.mean() - p.rf_daily) / tail_loss(port, p.confidence))


def _max_excess(p: CvarProblem) -> float:
    excess = p.scenarios.mean(axis=0) - p.rf_daily
    if p.regime == LONG_ONLY:
        return float(excess.max())
    res = linprog(-excess, A_eq=np.ones((1, p.N)), b_eq=[1.0], bounds=_weight_bounds(p), method="highs")
    if res.status == 3:
        return np.inf
    return float(-res.fun)


def _homogenized_lp(p: CvarProblem, blocks):
    """Charnes-Cooper form of max STARR: min CVaR(y) s.t. excess'y = 1, sum(y) = t >= 0."""
    S, N = p.S, p.N
    k = 1.0 / ((1.0 - p.confidence) * S)
    excess = p.scenarios.mean(axis=0) - p.rf_daily
    # variables: y (N), zeta, u (S), t
    A_ub = sparse.hstack([blocks, sparse.csr_matrix((S, 1))], format="csr")
    b_ub = np.zeros(S)
    if p.regime == LONG_SHORT and np.isfinite(p.bound):
        eye = sparse.identity(N, format="csr")
        zeros = sparse.csr_matrix((N, S + 1))
        col = sparse.csr_matrix(np.full((N, 1), -p.bound))
        box = sparse.vstack([sparse.hstack([eye, zeros, col]), sparse.hstack([-eye, zeros, col])])
        A_ub = sparse.vstack([A_ub, box], format="csr")
        b_ub = np.zeros(S + 2 * N)
    A_eq = np.zeros((2, N + S + 2))
    A_eq[0, :N] = excess
    A_eq[1, :N] = 1.0
    A_eq[1, -1] = -1.0
    c = np.concatenate([np.zeros(N), [1.0], np.full(S, k), [0.0]])
    ybounds = [(0.0, None)] * N if p.regime == LONG_ONLY else [(None, None)] * N
    bounds = ybounds + [(None, None)] + [(0.0, None)] * S + [(0.0, None)]
    res = _run_lp(c, A_ub, b_ub, sparse.csr_matrix(A_eq), [1.0, 0.0], bounds, "STARR LP")
    y, t = res.x[:N], res.x[-1]
    if not t > 0 or res.fun <= 0:
        raise SolverFailure("STARR is unbounded: some feasible portfolio has a non-positive tail loss")
    return y / t


def max_starr(p: CvarProblem, max_iter: int = 50, backend=None) -> CvarSolution:
    """Maximize (mean excess return) / CVaR.

    Starts from the homogenized-LP optimum and runs Dinkelbach iterations
    ``max_w excess(w) - lam * CVaR(w)`` until the parametric optimum is zero
    to within ``RATIO_TOL``, which certifies ``lam`` as the optimal ratio.
    """
    if _max_excess(p) <= 0:
        raise NoTangency("no feasible portfolio earns a positive mean excess return")
    backend = backend or ScipyBackend()
    blocks = _lp_blocks(p.scenarios) if isinstance(backend, ScipyBackend) else None
    w = backend.homogenized(p, blocks)
    w = _finish(p, w).weights
    lam = starr_of(p, w)
    solves = 1
    for _ in range(max_iter):
        cand, _, fun = backend.weighted(p, lam, 1.0, blocks)
        solves += 1
        # fun = lam*CVaR(cand) - mean(cand);  F(lam) = -fun - rf
        F = -fun - p.rf_daily
        if F <= RATIO_TOL * max(1.0, abs(lam)):
            break
        cand = _finish(p, cand).weights
        new = starr_of(p, cand)
        if new <= lam:
            break
        w, lam = cand, new
    else:
        raise SolverFailure("Dinkelbach iterations did not converge", iterations=max_iter)
    wv = _finish(p, w)
    port = p.scenarios @ wv.weights
    loss = tail_loss(port, p.confidence)
    return CvarSolution(wv, loss, float("nan"), (port.mean() - p.rf_daily) / loss, solves)


def max_starr_portfolio(p: CvarProblem, backend=None) -> WeightVector:
    if p.N == 1:
        if p.scenarios.mean() - p.rf_daily <= 0:
            raise NoTangency("single asset does not beat the risk-free rate")
        return WeightVector(p.tickers, np.ones(1), p.regime)
    return max_starr(p, backend=backend).weights


# -- persistent HiGHS models -------------------------------------------------------

class HighsBackend:
    """Keeps the CVaR LPs alive between calls and re-solves from the last basis.

    Consecutive rolling windows differ by one scenario, which is patched in
    place (scenario order is irrelevant to CVaR); any other change reloads the
    matrix but keeps the basis as a starting point.  One instance serves one
    strategy (fixed confidence, regime and bound) and is not thread-safe.
    """

    def __init__(self):
        import highspy  # noqa: F401  (fail early when unavailable)

        self._models = {}

    def _model(self, kind, p):
        key = (kind, p.S, p.N, p.confidence, p.regime, p.bound)
        m = self._models.get(kind)
        if m is None or m.key != key:
            m = _HighsModel(kind, p)
            m.key = key
            self._models[kind] = m
        else:
            m.load(p.scenarios)
        return m

    def weighted(self, p: CvarProblem, risk_weight: float, mean_weight: float, blocks=None):
        m = self._model("weighted", p)
        k = 1.0 / ((1.0 - p.confidence) * p.S)
        mu = p.scenarios.mean(axis=0)
        m.set_cost(np.concatenate([-mean_weight * mu, [risk_weight], np.full(p.S, risk_weight * k)]))
        x, fun = m.solve("CVaR LP")
        return x[:p.N], float(x[p.N]), fun

    def homogenized(self, p: CvarProblem, blocks=None):
        m = self._model("homogenized", p)
        m.set_excess(p.scenarios.mean(axis=0) - p.rf_daily)
        x, fun = m.solve("STARR LP")
        y, t = x[:p.N], x[-1]
        if not t > 0 or fun <= 0:
            raise SolverFailure("STARR is unbounded: some feasible portfolio has a non-positive tail loss")
        return y / t


class _HighsModel:
    def __init__(self, kind, p: CvarProblem):
        import highspy

        self.hs = highspy
        self.kind = kind
        self.S, self.N = p.S, p.N
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        self.h.setOptionValue("simplex_strategy", 1)  # dual simplex
        self._last = None
        self._oldest = 0
        self._build(p)

    def _build(self, p):
        hs, S, N = self.hs, self.S, self.N
        inf = hs.kHighsInf
        k = 1.0 / ((1.0 - p.confidence) * S)
        R = p.scenarios
        if p.regime == LONG_ONLY:
            wl, wu = np.zeros(N), np.full(N, inf)
        elif self.kind == "homogenized" or not np.isfinite(p.bound):
            wl, wu = np.full(N, -inf), np.full(N, inf)
        else:
            wl, wu = np.full(N, -p.bound), np.full(N, p.bound)
        scen = sparse.hstack([sparse.csr_matrix(R), sparse.csr_matrix(np.ones((S, 1))),
                              sparse.identity(S, format="csr")], format="csr")
        if self.kind == "weighted":
            ncol = N + 1 + S
            A = sparse.vstack([scen, sparse.csr_matrix(np.concatenate([np.ones(N), np.zeros(S + 1)])[None, :])])
            rl = np.concatenate([np.zeros(S), [1.0]])
            ru = np.concatenate([np.full(S, inf), [1.0]])
            cost = np.concatenate([np.zeros(N), [1.0], np.full(S, k)])
            cl = np.concatenate([wl, [-inf], np.zeros(S)])
            cu = np.concatenate([wu, [inf], np.full(S, inf)])
        else:
            ncol = N + 2 + S
            scen = sparse.hstack([scen, sparse.csr_matrix((S, 1))], format="csr")
            excess = np.concatenate([R.mean(axis=0) - p.rf_daily, np.zeros(S + 2)])
            budget = np.concatenate([np.ones(N), np.zeros(S + 1), [-1.0]])
            rows = [scen, sparse.csr_matrix(excess[None, :]), sparse.csr_matrix(budget[None, :])]
            rl = [np.zeros(S), [1.0], [0.0]]
            ru = [np.full(S, inf), [1.0], [0.0]]
            if p.regime == LONG_SHORT and np.isfinite(p.bound):
                eye = sparse.identity(N, format="csr")
                zeros = sparse.csr_matrix((N, S + 1))
                col = sparse.csr_matrix(np.full((N, 1), -p.bound))
                rows += [sparse.hstack([eye, zeros, col]), sparse.hstack([-eye, zeros, col])]
                rl.append(np.full(2 * N, -inf))
                ru.append(np.zeros(2 * N))
            A = sparse.vstack(rows)
            rl, ru = np.concatenate(rl), np.concatenate(ru)
            cost = np.concatenate([np.zeros(N), [1.0], np.full(S, k), [0.0]])
            cl = np.concatenate([wl, [-inf], np.zeros(S), [0.0]])
            cu = np.full(ncol, inf)
        A = sparse.csc_matrix(A)
        lp = self.hs.HighsLp()
        lp.num_col_ = ncol
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = cost
        lp.col_lower_ = cl
        lp.col_upper_ = cu
        lp.row_lower_ = rl
        lp.row_upper_ = ru
        lp.a_matrix_.format_ = self.hs.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        self.lp = lp
        self.h.passModel(lp)
        self._last = R.copy()
        self._oldest = 0

    def load(self, R):
        if np.array_equal(R, self._last):
            return
        if np.array_equal(R[:-1], self._last[1:]):
            row = self._oldest
            for j in range(self.N):
                self.h.changeCoeff(row, j, float(R[-1, j]))
            self._oldest = (row + 1) % self.S
        else:
            basis = self.h.getBasis()
            A = self.lp.a_matrix_
            start, index, value = np.asarray(A.start_), np.asarray(A.index_), np.array(A.value_)
            for j in range(self.N):
                lo, hi = start[j], start[j + 1]
                rows = index[lo:hi]
                scen = rows < self.S
                value[lo:hi][scen] = R[rows[scen], j]
            A.value_ = value
            self.h.passModel(self.lp)
            self.h.setBasis(basis)
            self._oldest = 0
        self._last = R.copy()

    def set_cost(self, cost):
        n = len(cost)
        self.h.changeColsCost(n, np.arange(n, dtype=np.int32), np.asarray(cost, dtype=float))

    def set_excess(self, excess):
        for j in range(self.N):
            self.h.changeCoeff(self.S, j, float(excess[j]))

    def solve(self, what):
        self.h.run()
        status = self.h.getModelStatus()
        ms = self.hs.HighsModelStatus
        if status == ms.kInfeasible:
            raise Infeasible(f"{what}: infeasible")
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            raise UnboundedDescent(f"{what}: unbounded; long-short problems need finite weight bounds")
        if status != ms.kOptimal:
            raise SolverFailure(f"{what}: {self.h.modelStatusToString(status)}")
        x = np.array(self.h.getSolution().col_value)
        return x, float(self.h.getInfo().objective_function_value)
