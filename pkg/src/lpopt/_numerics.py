"""Small shared numerical helpers."""

import numpy as np
from scipy.optimize import lsq_linear

ACTIVITY_TOL = 1e-8


def bounded_lstsq(A, b, lower):
    """Minimise ``||A y - b||_2`` subject to ``y >= lower`` (``-inf`` = free).

    Returns ``(y, rank_deficient)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lower = np.asarray(lower, dtype=float)
    m = A.shape[1]
    if m == 0:
        return np.zeros(0), False
    rank_deficient = A.shape[0] == 0 or np.linalg.matrix_rank(A) < m
    if A.shape[0] == 0:
        return np.zeros(m), True
    if np.all(np.isinf(lower)):
        y = np.linalg.lstsq(A, b, rcond=None)[0]
    else:
        res = lsq_linear(A, b, bounds=(lower, np.full(m, np.inf)), method="bvls",
                         tol=1e-15, lsmr_tol=None)
        y = np.maximum(res.x, lower)
    return y, rank_deficient


def interval_distance(t, lo, hi):
    """Distance of each ``t`` to the interval ``[lo, hi]`` (bounds may be infinite)."""
    return np.maximum(np.maximum(lo - t, t - hi), 0.0)


def is_active(value: float, grad) -> bool:
    return value >= -ACTIVITY_TOL * (1.0 + float(np.max(np.abs(grad), initial=0.0)))
