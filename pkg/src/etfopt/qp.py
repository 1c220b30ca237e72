"""Small dense convex QP solver (primal active set).

Solves::

    minimize    0.5 x'Qx + c'x
    subject to  A x  = b
                G x <= h

for positive definite ``Q`` (positive definite on the equality null space is
enough).  Problem sizes here are tens of variables, so dense KKT solves are
cheap and exact; an infeasible starting point is repaired with a phase-1 LP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, SolverFailure


@dataclass
class QPResult:
    x: np.ndarray
    fun: float
    iterations: int
    kkt_residual: float
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    active: tuple


def _feasible_start(n, A, b, G, h):
    res = linprog(np.zeros(n), A_ub=G if len(h) else None, b_ub=h if len(h) else None,
                  A_eq=A if len(b) else None, b_eq=b if len(b) else None,
                  bounds=[(None, None)] * n, method="highs")
    if res.status != 0:
        raise Infeasible(f"QP constraints are infeasible ({res.message})")
    return res.x


def solve_qp(Q, c, A=None, b=None, G=None, h=None, x0=None, tol=1e-10, max_iter=500) -> QPResult:
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    c = np.asarray(c, dtype=float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    G = np.zeros((0, n)) if G is None else np.atleast_2d(np.asarray(G, dtype=float))
    h = np.zeros(0) if h is None else np.atleast_1d(np.asarray(h, dtype=float))
    m_eq, m_in = len(b), len(h)

    # Work on a unit-scale objective; the minimizer is unchanged.
    scale = max(np.abs(Q).max(), np.abs(c).max() if n else 0.0, 1e-300)
    Qs, cs = Q / scale, c / scale
    feas_tol = 1e-11 * max(1.0, np.abs(h).max() if m_in else 1.0, np.abs(b).max() if m_eq else 1.0)

    def feasible(x):
        ok_eq = m_eq == 0 or np.abs(A @ x - b).max() <= 1e-9 * max(1.0, np.abs(b).max())
        ok_in = m_in == 0 or (G @ x - h).max() <= feas_tol
        return ok_eq and ok_in

    x = None if x0 is None else np.asarray(x0, dtype=float).copy()
    if x is None or not feasible(x):
        x = _feasible_start(n, A, b, G, h)
        # phase-1 output can sit a hair outside; pull it back onto the bounds it violates
        if m_in:
            viol = G @ x - h
            if viol.max() > feas_tol:
                x = _feasible_start(n, A, b, G, h - 10 * feas_tol)

    working: list[int] = []
    lam_eq = np.zeros(m_eq)
    mu = np.zeros(m_in)
    it = 0
    for it in range(1, max_iter + 1):
        g = Qs @ x + cs
        Aw = np.vstack([A, G[working]]) if working else A
        k = Aw.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = Qs
        kkt[:n, n:] = Aw.T
        kkt[n:, :n] = Aw
        rhs = np.concatenate([-g, np.zeros(k)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        p = sol[:n]
        # multipliers in the convention Qx + c + A'lam + G'mu = 0
        mult = sol[n:]

        if np.abs(p).max() <= 1e-13 * max(1.0, np.abs(x).max()):
            lam_eq = mult[:m_eq]
            mu_w = mult[m_eq:]
            if len(mu_w) == 0 or mu_w.min() >= -tol:
                mu = np.zeros(m_in)
                if working:
                    mu[working] = np.maximum(mu_w, 0.0)
                break
            drop = int(np.argmin(mu_w))
            working.pop(drop)
            continue

        alpha = 1.0
        block = -1
        if m_in:
            Gp = G @ p
            slack = h - G @ x
            for i in range(m_in):
                if i in working or Gp[i] <= 1e-15 * max(1.0, np.abs(G[i]).max()):
                    continue
                step = max(slack[i], 0.0) / Gp[i]
                if step < alpha:
                    alpha, block = step, i
        x = x + alpha * p
        if block >= 0:
            working.append(block)
    else:
        raise SolverFailure("active-set QP did not converge", iterations=max_iter,
                            residual=_kkt_residual(Qs, cs, A, b, G, h, x, lam_eq, mu))

    resid = _kkt_residual(Qs, cs, A, b, G, h, x, lam_eq, mu)
    return QPResult(
        x=x,
        fun=float(0.5 * x @ Q @ x + c @ x),
        iterations=it,
        kkt_residual=resid,
        eq_multipliers=lam_eq * scale,
        ineq_multipliers=mu * scale,
        active=tuple(sorted(working)),
    )


def _kkt_residual(Q, c, A, b, G, h, x, lam, mu):
    stat = Q @ x + c
    if len(lam):
        stat = stat + A.T @ lam
    if len(mu):
        stat = stat + G.T @ mu
    parts = [np.abs(stat).max() if len(stat) else 0.0]
    if len(b):
        parts.append(np.abs(A @ x - b).max())
    if len(h):
        parts.append(max((G @ x - h).max(), 0.0))
        parts.append(np.abs(mu * (G @ x - h)).max())
    return float(max(parts))
