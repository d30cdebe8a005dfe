"""Dense two-phase simplex method for small linear programs.

    minimise c'x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0

Bland's rule is used throughout, so the method terminates on degenerate
problems; it is meant for the tiny phase-I style programs of the
constraint-qualification checks, not for large LPs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    fun: float

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, tol, max_iter, allowed):
    m = T.shape[0] - 1
    for _ in range(max_iter):
        rc = T[-1, :-1]
        entering = np.flatnonzero((rc < -tol) & allowed)
        if entering.size == 0:
            return OPTIMAL
        j = entering[0]
        col = T[:m, j]
        pos = col > tol
        if not pos.any():
            return UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol)
        r = min(ties, key=lambda i: basis[i])
        _pivot(T, r, j)
        basis[r] = j
    return ITERATION_LIMIT


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, tol: float = 1e-11,
            max_iter: int = 50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # rows: [A_ub I; A_eq 0], right-hand sides made nonnegative
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)

    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = neg[:m_ub]
    art_rows = np.flatnonzero(needs_art)
    n_std = n + m_ub
    n_tot = n_std + art_rows.size

    T = np.zeros((m + 1, n_tot + 1))
    T[:m, :n_std] = A
    T[:m, -1] = b
    basis = [n + i if i < m_ub and not neg[i] else -1 for i in range(m)]
    for k, i in enumerate(art_rows):
        T[i, n_std + k] = 1.0
        basis[i] = n_std + k

    scale_tol = tol * max(1.0, float(np.max(np.abs(b), initial=0.0)))

    # phase I: minimise the sum of artificials
    if art_rows.size:
        T[-1, n_std:n_tot] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status = _run(T, basis, tol, max_iter, np.ones(n_tot, dtype=bool))
        if status == ITERATION_LIMIT:
            return LPResult(status, None, np.nan)
        if -T[-1, -1] > scale_tol:
            return LPResult(INFEASIBLE, None, np.nan)
        # drive remaining (zero-level) artificials out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= n_std:
                cand = np.flatnonzero(np.abs(T[r, :n_std]) > tol)
                if cand.size:
                    _pivot(T, r, cand[0])
                    basis[r] = cand[0]
                else:
                    keep[r] = False
        T = T[keep]
        basis = [bv for bv, k in zip(basis, keep[:m]) if k]
        T = np.delete(T, np.s_[n_std:n_tot], axis=1)

    # phase II
    T[-1] = 0.0
    T[-1, :n] = c
    for r, bv in enumerate(basis):
        if T[-1, bv] != 0.0:
            T[-1] -= T[-1, bv] * T[r]
    status = _run(T, basis, tol, max_iter, np.ones(n_std, dtype=bool))
    if status != OPTIMAL:
        return LPResult(status, None, np.nan)
    x = np.zeros(n_std)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult(OPTIMAL, x, float(c @ x))
