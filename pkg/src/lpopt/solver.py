"""Iteratively reweighted l1 method for constrained lp-regularized problems

    minimise  f0(x) + lam * ||x||_p^p   over x in Gamma   (Gamma closed, convex)

Each iteration linearises the smoothed lp term ``sum (|x_i| + eps_i)^p`` into
weights ``w_i = p (|x_i| + eps_i)^(p-1)``, solves the weighted-l1 proximal
subproblem exactly, and shrinks ``eps`` geometrically.  The local model is
``Q_k(x) = <grad f0(x^k), x> + (beta/2)||x - x^k||^2`` with ``beta =
beta_factor * L_f``, which is strongly convex with modulus ``M = beta``.

Level-set boundedness of the smoothed objective at the starting point is
assumed and not checked; supplying it is the caller's responsibility.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from .calculus import LpRegularizer
from .optimality import MultiplierSet
from .oracles import EQUALITY, SmoothOracle
from .subproblems import (
    FeasibleSet,
    SubproblemHook,
    SubproblemSolution,
    SubproblemStationarityError,
    UnsupportedSubproblemError,
    prox_weighted_l1,
    stationarity_residual,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"


class SolverError(RuntimeError):
    """Base class for aborted solver runs."""


class InfeasibleStartError(SolverError):
    pass


class NonFiniteError(SolverError):
    pass


class DescentViolationError(SolverError):
    """The smoothed objective failed the sufficient-decrease inequality.

    Signals an underestimated Lipschitz constant or an inexact subproblem
    oracle.
    """


class PowerIterationError(RuntimeError):
    def __init__(self, rayleigh: float, residual: float, iterations: int):
        super().__init__(
            f"power iteration did not converge in {iterations} iterations; "
            f"best Rayleigh quotient {rayleigh!r} (residual {residual:.3e})"
        )
        self.rayleigh = rayleigh
        self.residual = residual


@dataclass(frozen=True)
class SolverParams:
    alpha: float = 0.998
    beta_factor: float = 1.1
    eps0: float = 1e-3
    max_iters: int = 100_000
    tol_step: float = 1e-10
    tol_residual: float = 1e-8
    eps_floor: float = 1e-14

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.beta_factor > 0.5:
            raise ValueError("beta_factor must exceed 1/2 so that beta > L_f / 2")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not self.max_iters >= 1:
            raise ValueError("max_iters must be positive")
        if self.tol_step < 0 or self.tol_residual < 0 or self.eps_floor < 0:
            raise ValueError("tolerances must be nonnegative")


class IterateState(NamedTuple):
    x: np.ndarray
    eps: np.ndarray
    F: float


@dataclass
class SolveReport:
    """History of one solver run.

    ``objective_trace[k]`` is ``F(x^k; eps^k)``; the per-step arrays
    (``step_norms``, ``descent_slack``, ``residuals``, ``duals``) are indexed by
    the step k -> k+1.  ``iterates`` is empty when recording was disabled.
    """

    x: np.ndarray
    eps: np.ndarray
    beta: float
    lipschitz: float
    termination: str
    iterates: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    descent_slack: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: List[MultiplierSet] = field(default_factory=list)
    final_solution: Optional[SubproblemSolution] = None

    @property
    def iterations(self) -> int:
        return self.step_norms.size

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED


def power_iteration(R, rtol: float = 1e-8, max_iter: int = 10_000, seed: int = 0):
    """Largest eigenvalue of a symmetric PSD matrix.

    Stops once ``||R v - rho v|| <= rtol * rho``.  Returns ``(rho, v)``.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    rho, resid = 0.0, np.inf
    for _ in range(max_iter):
        Rv = R @ v
        rho = float(v @ Rv)
        resid = float(np.linalg.norm(Rv - rho * v))
        if resid <= rtol * abs(rho) or not np.any(Rv):
            return rho, v
        v = Rv / np.linalg.norm(Rv)
    raise PowerIterationError(rho, resid, max_iter)


def estimate_lipschitz(source, rtol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Gradient Lipschitz constant from a matrix, a quadratic oracle, or a declared value."""
    if isinstance(source, SmoothOracle):
        if source.matrix is not None:
            return power_iteration(source.matrix, rtol, max_iter)[0]
        if source.lipschitz is None:
            raise ValueError("oracle declares no Lipschitz constant and has no matrix")
        return float(source.lipschitz)
    return power_iteration(source, rtol, max_iter)[0]


def assert_descent(prev, next, M: float, Lf: float) -> float:
    """Slack ``F(prev) - F(next) - (M - Lf/2) ||x_next - x_prev||^2``.

    ``prev`` and ``next`` are ``(x, eps, F)`` triples.  A negative slack
    beyond rounding means the decrease guarantee was violated.
    """
    dx = np.asarray(next[0]) - np.asarray(prev[0])
    return float(prev[2] - next[2] - (M - 0.5 * Lf) * (dx @ dx))


def support_residual(grad, x, normal, reg: LpRegularizer) -> float:
    """``max_i |grad_i + lam p sign(x_i)|x_i|^(p-1) + normal_i|`` over the support."""
    nz = x != 0
    xs = x[nz]
    if xs.size == 0:
        return 0.0
    r = (grad + normal)[nz]
    if reg.lam:
        r += np.copysign(reg.lam * reg.p * np.abs(xs) ** (reg.p - 1.0), xs)
    return float(abs(r).max())


def _multipliers(sol: SubproblemSolution, gamma: FeasibleSet) -> MultiplierSet:
    eq, ineq = {}, {}
    for j, y in sol.constraint_duals.items():
        (eq if gamma.constraints[j].kind == EQUALITY else ineq)[j] = float(y)
    return MultiplierSet(equality=eq, active_inequality=ineq, set_dual=sol.equality_dual)


class ReweightedL1Solver:
    """Solver instance; holds an optional custom subproblem oracle."""

    def __init__(self, params: Optional[SolverParams] = None):
        self.params = params or SolverParams()
        self._hook: Optional[SubproblemHook] = None

    def register_subproblem(self, oracle) -> SubproblemHook:
        """Use ``oracle(z, w, beta, lam) -> SubproblemSolution`` for subproblems.

        The oracle must return the exact minimiser of
        ``(beta/2)||x - z||^2 + lam sum w_i|x_i|`` over Gamma together with
        its multipliers; every returned solution is certified and a failing
        certificate aborts the run.
        """
        self._hook = SubproblemHook(oracle, self)
        return self._hook

    def solve(self, oracle: SmoothOracle, reg: LpRegularizer, gamma: FeasibleSet, x0,
              lipschitz: Optional[float] = None,
              callback: Optional[Callable[[int, np.ndarray, SubproblemSolution], None]] = None,
              record_iterates: bool = True,
              verify_subproblems: Optional[bool] = None) -> SolveReport:
        """Run the method from ``x0``.

        ``lipschitz`` overrides the constant estimated from the oracle.
        ``callback(k, x_next, solution)`` is invoked after every step.
        Subproblem solutions are certified (stationarity and feasibility) on
        every step when they come from a registered oracle, or when
        ``verify_subproblems`` is set; descent is always checked.
        """
        prm = self.params
        if reg.lam is None:
            raise ValueError("the solver needs a penalty weight (lam), not a ball radius")
        lam, p = float(reg.lam), float(reg.p)
        x = np.array(x0, dtype=float)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("x0 is not finite")
        if not gamma.contains(x, 1e-10):
            raise InfeasibleStartError(f"x0 violates the feasible set by {gamma.violation(x):.3e}")
        if self._hook is None and not gamma.structured:
            raise UnsupportedSubproblemError(gamma.kind)

        Lf = float(lipschitz) if lipschitz is not None else estimate_lipschitz(oracle)
        beta = prm.beta_factor * Lf if Lf > 0 else prm.beta_factor
        decrease = beta - 0.5 * Lf
        kernel = self._hook.oracle if self._hook is not None else None
        verify = kernel is not None if verify_subproblems is None else verify_subproblems

        eps = np.full(x.size, prm.eps0)
        g = np.asarray(oracle.gradient(x), dtype=float)
        base = np.abs(x) + eps
        powered = base ** p
        F = float(oracle.value(x)) + lam * float(powered.sum())
        if not (np.isfinite(F) and np.all(np.isfinite(g))):
            raise NonFiniteError("oracle returned non-finite values at x0")

        iterates = [(x, eps)] if record_iterates else []
        objective = [F]
        steps, slacks, residuals, duals = [], [], [], []
        termination = MAX_ITERS
        sol = None

        for k in range(prm.max_iters):
            w = p * powered / base
            z = x - g / beta
            if kernel is None:
                sol = prox_weighted_l1(z, w, beta, lam, gamma)
            else:
                sol = kernel(z, w, beta, lam)
            if verify:
                tol_stat = 1e-10 * (1.0 + float(abs(g).max()))
                stat = stationarity_residual(sol, z, w, beta, lam, gamma)
                if not stat <= tol_stat:
                    raise SubproblemStationarityError(
                        f"iteration {k}: subproblem solution fails stationarity "
                        f"({stat:.3e} > {tol_stat:.3e})"
                    )
            x_new = np.asarray(sol.x, dtype=float)
            if not gamma.contains(x_new, 1e-10):
                raise SubproblemStationarityError(
                    f"iteration {k}: subproblem solution infeasible by {gamma.violation(x_new):.3e}"
                )
            eps_new = np.maximum(prm.alpha * eps, prm.eps_floor)
            g_new = np.asarray(oracle.gradient(x_new), dtype=float)
            base = np.abs(x_new) + eps_new
            powered = base ** p
            F_new = float(oracle.value(x_new)) + lam * float(powered.sum())
            if not (np.isfinite(F_new) and np.all(np.isfinite(g_new))):
                raise NonFiniteError(f"oracle returned non-finite values at iteration {k}")

            dx = x_new - x
            step2 = float(dx @ dx)
            slack = F - F_new - decrease * step2
            if slack < -1e-10 * (1.0 + abs(F)):
                raise DescentViolationError(
                    f"iteration {k}: descent slack {slack:.3e} (F {F!r} -> {F_new!r}); "
                    "check the Lipschitz constant and the subproblem oracle"
                )
            res = support_residual(g_new, x_new, np.asarray(sol.normal, dtype=float), reg)

            step = step2 ** 0.5
            steps.append(step)
            slacks.append(slack)
            residuals.append(res)
            duals.append(_multipliers(sol, gamma))
            objective.append(F_new)
            if record_iterates:
                iterates.append((x_new, eps_new))
            if callback is not None:
                callback(k, x_new, sol)

            x, eps, g, F = x_new, eps_new, g_new, F_new
            if step <= prm.tol_step and res <= prm.tol_residual:
                termination = CONVERGED
                break

        log.debug("irl1: %s after %d iterations, F = %r", termination, len(steps), F)
        return SolveReport(
            x=x, eps=eps, beta=beta, lipschitz=Lf, termination=termination,
            iterates=iterates,
            objective_trace=np.array(objective),
            step_norms=np.array(steps),
            descent_slack=np.array(slacks),
            residuals=np.array(residuals),
            duals=duals,
            final_solution=sol,
        )


def solve(oracle: SmoothOracle, reg: LpRegularizer, gamma: FeasibleSet, x0,
          params: Optional[SolverParams] = None, **kwargs) -> SolveReport:
    """Run the reweighted l1 method with the built-in subproblem solvers."""
    return ReweightedL1Solver(params).solve(oracle, reg, gamma, x0, **kwargs)
