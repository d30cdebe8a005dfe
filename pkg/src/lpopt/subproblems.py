"""Exact solvers for the weighted-l1 proximal subproblem

    minimise  <g, x> + (beta/2) ||x - xk||^2 + lam * sum_i w_i |x_i|   over x in Gamma

for the structured feasible sets.  All kernels work on the shifted point
``z = xk - g / beta``; the problem is then the weighted-l1 prox of ``z``
restricted to Gamma.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ._numerics import bounded_lstsq, interval_distance, is_active
from .oracles import EQUALITY, Constraint

UNCONSTRAINED = "unconstrained"
NONNEGATIVE = "nonnegative"
BOX = "box"
SIMPLEX = "simplex"
GENERAL = "general"
STRUCTURED_KINDS = (UNCONSTRAINED, NONNEGATIVE, BOX, SIMPLEX)


class UnsupportedSubproblemError(NotImplementedError):
    """No built-in exact solver exists for this feasible set."""

    def __init__(self, kind):
        super().__init__(
            f"unsupported-exact-subproblem: no built-in solver for {kind!r} sets; "
            "register a custom subproblem oracle on the solver"
        )


class SubproblemStationarityError(RuntimeError):
    """A subproblem solution failed its optimality certificate."""


@dataclass(frozen=True)
class FeasibleSet:
    """The closed set Gamma.  Build with the classmethod constructors."""

    kind: str
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    scale: Optional[float] = None
    constraints: Sequence[Constraint] = ()
    convex: bool = True

    @classmethod
    def unconstrained(cls):
        return cls(UNCONSTRAINED)

    @classmethod
    def nonnegative(cls):
        return cls(NONNEGATIVE)

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(lower >= upper):
            raise ValueError("box requires lower < upper componentwise")
        return cls(BOX, lower=lower, upper=upper)

    @classmethod
    def simplex(cls, scale: float = 1.0):
        if not scale > 0:
            raise ValueError("simplex scale must be positive")
        return cls(SIMPLEX, scale=float(scale))

    @classmethod
    def general(cls, constraints: Sequence[Constraint], convex: bool = False):
        """Set cut out by smooth constraints.  ``convex`` is the caller's claim."""
        return cls(GENERAL, constraints=tuple(constraints), convex=convex)

    @property
    def structured(self) -> bool:
        return self.kind in STRUCTURED_KINDS

    def violation(self, x) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        if self.kind == UNCONSTRAINED:
            return 0.0
        if self.kind == NONNEGATIVE:
            return float(max(0.0, -x.min(initial=0.0)))
        if self.kind == BOX:
            lo, hi = np.broadcast_arrays(self.lower, self.upper)
            return float(max(0.0, np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
        if self.kind == SIMPLEX:
            return float(max(-x.min(initial=0.0), abs(x.sum() - self.scale)))
        worst = 0.0
        for c in self.constraints:
            v = float(c.value(x))
            worst = max(worst, abs(v) if c.kind == EQUALITY else v)
        return worst

    def contains(self, x, tol: float = 1e-10) -> bool:
        return self.violation(x) <= tol

    def normal_intervals(self, x, threshold: float = 0.0):
        """Per-index normal cone of a product-structured set, as intervals.

        For the simplex this is the cone of the nonnegative orthant; the free
        multiple of the all-ones vector is added separately by callers.
        """
        if not self.structured:
            raise UnsupportedSubproblemError(self.kind)
        x = np.asarray(x, dtype=float)
        n = x.size
        lo = np.zeros(n)
        hi = np.zeros(n)
        if self.kind in (NONNEGATIVE, SIMPLEX):
            lo[np.abs(x) <= threshold] = -np.inf
        elif self.kind == BOX:
            l, u = np.broadcast_arrays(self.lower, self.upper)
            at_lower = np.abs(x - l) <= threshold + 1e-12 * (1.0 + np.abs(l))
            at_upper = np.abs(x - u) <= threshold + 1e-12 * (1.0 + np.abs(u))
            lo[at_lower] = -np.inf
            hi[at_upper] = np.inf
        return lo, hi


@dataclass
class SubproblemSolution:
    """Minimiser of the subproblem plus the multipliers certifying it.

    ``l1_subgradient`` is the y in d|x|, ``normal`` the element of N_Gamma(x)
    that closes stationarity.  For the simplex, ``normal = nu * e - bound_duals``.
    """

    x: np.ndarray
    l1_subgradient: np.ndarray
    normal: np.ndarray
    equality_dual: Optional[float] = None
    bound_duals: Optional[np.ndarray] = None
    constraint_duals: Dict[int, float] = field(default_factory=dict)


_RANKS: Dict[int, np.ndarray] = {}


def project_simplex(z, s: float = 1.0):
    """Euclidean projection onto ``{x >= 0, sum x = s}``.

    Returns ``(x, nu)`` with ``x = max(z - nu, 0)``.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if n == 0:
        raise ValueError("cannot project an empty vector")
    if not s > 0:
        raise ValueError("simplex scale must be positive")
    k = _RANKS.get(n)
    if k is None:
        k = _RANKS.setdefault(n, np.arange(1, n + 1, dtype=float))
    u = np.sort(z)[::-1]
    css = u.cumsum() - s
    rho = np.flatnonzero(u * k > css)[-1]
    nu = css[rho] / (rho + 1)
    return np.maximum(z - nu, 0.0), float(nu)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _zero_subgradient(z, t):
    """y on zero entries of an unconstrained weighted-l1 prox: z/t clipped."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(t > 0, z / t, 0.0)
    return np.clip(y, -1.0, 1.0)


def _prox_unconstrained(z, t, beta):
    x = soft_threshold(z, t)
    y = np.where(x != 0, np.sign(x), _zero_subgradient(z, t))
    return SubproblemSolution(x=x, l1_subgradient=y, normal=np.zeros_like(x))


def _prox_nonnegative(z, t, beta):
    x = np.maximum(z - t, 0.0)
    y = np.ones_like(x)
    mu = np.where(x > 0, 0.0, beta * (t - z))
    return SubproblemSolution(x=x, l1_subgradient=y, normal=-mu, bound_duals=mu)


def _box_candidates(z, t, beta, lo, hi):
    # Per-index minimum over the sign regions of the box plus the point 0.
    best = np.full(z.shape, np.nan)
    best_val = np.full(z.shape, np.inf)

    def consider(cand, ok):
        val = 0.5 * beta * (cand - z) ** 2 + beta * t * np.abs(cand)
        take = ok & (val < best_val)
        best[take] = cand[take]
        best_val[take] = val[take]

    consider(np.zeros_like(z), (lo <= 0) & (hi >= 0))
    consider(np.clip(z - t, np.maximum(lo, 0.0), hi), hi > 0)
    consider(np.clip(z + t, lo, np.minimum(hi, 0.0)), lo < 0)
    return best


def _prox_box(z, t, beta, gamma):
    lo, hi = np.broadcast_arrays(gamma.lower, gamma.upper)
    lo = np.broadcast_to(lo, z.shape)
    hi = np.broadcast_to(hi, z.shape)
    if np.all((lo <= 0) & (hi >= 0)):
        x = np.clip(soft_threshold(z, t), lo, hi)
    else:
        x = _box_candidates(z, t, beta, lo, hi)
    y = np.where(x != 0, np.sign(x), _zero_subgradient(z, t))
    # At a zero lower (upper) bound the best subgradient choice is +1 (-1).
    y = np.where((x == 0) & (lo == 0), 1.0, y)
    y = np.where((x == 0) & (hi == 0), -1.0, y)
    normal = beta * (z - x) - beta * t * y
    normal = np.where((x > lo) & (x < hi), 0.0, normal)
    return SubproblemSolution(x=x, l1_subgradient=y, normal=normal,
                              bound_duals=np.abs(normal))


def _prox_simplex(z, t, beta, gamma):
    v = z - t
    x, thresh = project_simplex(v, gamma.scale)
    nu = beta * thresh
    mu = np.where(x > 0, 0.0, beta * (thresh - v))
    return SubproblemSolution(x=x, l1_subgradient=np.ones(x.size), normal=nu - mu,
                              equality_dual=nu, bound_duals=mu)


def prox_weighted_l1(z, w, beta: float, lam: float, gamma: FeasibleSet) -> SubproblemSolution:
    """Solve ``min (beta/2)||x - z||^2 + lam sum w_i |x_i|`` over ``gamma``."""
    z = np.asarray(z, dtype=float)
    t = lam * np.asarray(w, dtype=float) / beta
    if gamma.kind == UNCONSTRAINED:
        return _prox_unconstrained(z, t, beta)
    if gamma.kind == NONNEGATIVE:
        return _prox_nonnegative(z, t, beta)
    if gamma.kind == BOX:
        return _prox_box(z, t, beta, gamma)
    if gamma.kind == SIMPLEX:
        return _prox_simplex(z, t, beta, gamma)
    raise UnsupportedSubproblemError(gamma.kind)


def solve_subproblem(xk, grad, beta: float, lam: float, w, gamma: FeasibleSet) -> SubproblemSolution:
    """Exact minimiser of ``<grad, x> + (beta/2)||x - xk||^2 + lam sum w_i|x_i|`` over ``gamma``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if np.any(np.asarray(w) <= 0):
        raise ValueError("weights must be positive")
    if not gamma.structured:
        raise UnsupportedSubproblemError(gamma.kind)
    z = np.asarray(xk, dtype=float) - np.asarray(grad, dtype=float) / beta
    return prox_weighted_l1(z, w, beta, lam, gamma)


def subproblem_objective(x, z, w, beta, lam):
    """Subproblem objective in shifted form (differs from the original by a constant)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * beta * float(np.sum((x - z) ** 2)) + lam * float(np.sum(w * np.abs(x)))


# --------------------------------------------------------------------------
# optimality certificate of a returned solution


def _general_normal_residual(r, x, gamma, duals):
    """Smallest ``||r + sum_j y_j grad f_j(x)||_inf`` over admissible y."""
    rows, lower, keys, comp = [], [], [], 0.0
    for j, c in enumerate(gamma.constraints):
        g = np.asarray(c.gradient(x), dtype=float)
        val = float(c.value(x))
        if c.kind == EQUALITY:
            rows.append(g), lower.append(-np.inf), keys.append(j)
        elif is_active(val, g):
            rows.append(g), lower.append(0.0), keys.append(j)
        elif duals.get(j, 0.0) != 0.0:
            comp = max(comp, abs(duals[j] * val))
    if not rows:
        return max(float(np.max(np.abs(r), initial=0.0)), comp)
    J = np.array(rows).T
    if duals:
        y = np.array([duals.get(j, 0.0) for j in keys])
        if np.any(y < np.array(lower)):
            return np.inf
    else:
        y, _ = bounded_lstsq(J, -r, np.array(lower))
    return max(float(np.max(np.abs(r + J @ y))), comp)


def stationarity_residual(sol: SubproblemSolution, z, w, beta, lam, gamma: FeasibleSet) -> float:
    """Violation of ``0 in beta(x - z) + lam W y + N_Gamma(x)`` with ``y in d||x||_1``.

    ``y`` is taken from the solution and checked for validity; the normal-cone
    element is the best admissible one (the simplex multiplier is taken from
    the solution as given).
    """
    x = np.asarray(sol.x, dtype=float)
    y = np.asarray(sol.l1_subgradient, dtype=float)
    nz = x != 0
    bad_y = max(float(np.max(np.abs(y[nz] - np.sign(x[nz])), initial=0.0)),
                float(np.max(np.abs(y) - 1.0, initial=0.0)))
    r = beta * (x - z) + lam * w * y
    if gamma.kind == GENERAL:
        return max(bad_y, _general_normal_residual(r, x, gamma, sol.constraint_duals))
    if gamma.kind == SIMPLEX:
        if sol.equality_dual is None:
            return np.inf
        r = r + sol.equality_dual
    lo, hi = gamma.normal_intervals(x)
    viol = interval_distance(-r, lo, hi)
    return max(bad_y, float(np.max(viol, initial=0.0)))


SubproblemOracle = Callable[[np.ndarray, np.ndarray, float, float], SubproblemSolution]


def builtin_oracle(gamma: FeasibleSet) -> SubproblemOracle:
    """The built-in kernel for ``gamma`` in hook form ``(z, w, beta, lam) -> solution``."""
    if not gamma.structured:
        raise UnsupportedSubproblemError(gamma.kind)

    def oracle(z, w, beta, lam):
        return prox_weighted_l1(z, w, beta, lam, gamma)

    return oracle


@dataclass
class SubproblemHook:
    """Registration handle returned by ``ReweightedL1Solver.register_subproblem``."""

    oracle: SubproblemOracle
    _owner: object = field(default=None, repr=False)

    def remove(self):
        if self._owner is not None and self._owner._hook is self:
            self._owner._hook = None
        self._owner = None
