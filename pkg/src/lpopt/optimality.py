"""First-order optimality certification for lp problems.

Two problem kinds are covered:

* ``p1``: minimise f0(x) + lam ||x||_p^p over Gamma,
* ``p2``: minimise f0(x) subject to ||x||_p^p <= theta and x in Gamma.

All stationarity residuals live on the support of the point: zero components
see an unrestricted subdifferential of |.|^p (p < 1) and impose nothing.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ._numerics import bounded_lstsq, interval_distance, is_active
from .calculus import (
    InfeasiblePointError,
    LpRegularizer,
    Support,
    boundary_tolerance,
    lp_gradient_on_support,
    phi,
    support,
)
from .oracles import EQUALITY, INEQUALITY, Constraint, SmoothOracle, affine_constraint
from .simplex_lp import linprog
from .subproblems import BOX, GENERAL, NONNEGATIVE, SIMPLEX, UNCONSTRAINED, FeasibleSet

log = logging.getLogger(__name__)

P1, P2 = "p1", "p2"
KKT_P1 = "KKT-P1"
KKT_P2 = "KKT-P2"
AKKT = "AKKT"
EMFCQ = "EMFCQ"
HORIZON = "HORIZON"


@dataclass
class MultiplierSet:
    """Lagrange multipliers keyed by constraint index.

    ``set_dual`` is the multiplier of the simplex equality ``sum x = s``;
    ``ball_multiplier`` the multiplier of the lp-ball constraint.
    """

    equality: Dict[int, float] = field(default_factory=dict)
    active_inequality: Dict[int, float] = field(default_factory=dict)
    ball_multiplier: Optional[float] = None
    set_dual: Optional[float] = None
    degenerate: bool = False

    def __post_init__(self):
        if any(v < 0 for v in self.active_inequality.values()):
            raise ValueError("inequality multipliers must be nonnegative")
        if self.ball_multiplier is not None and self.ball_multiplier < 0:
            raise ValueError("the ball multiplier must be nonnegative")

    def as_dict(self) -> Dict[int, float]:
        out = dict(self.equality)
        out.update(self.active_inequality)
        return out

    def items(self):
        """``(label, value)`` pairs in a fixed order, for reporting."""
        out = []
        if self.set_dual is not None:
            out.append(("nu", self.set_dual))
        if self.ball_multiplier is not None:
            out.append(("y0", self.ball_multiplier))
        out += [(f"eq{j}", v) for j, v in sorted(self.equality.items())]
        out += [(f"in{j}", v) for j, v in sorted(self.active_inequality.items())]
        return out


@dataclass
class OptimalityCertificate:
    condition: str
    residual: float
    tolerance: float
    support: Support
    multipliers: MultiplierSet
    detail: np.ndarray
    note: str = ""

    @property
    def verdict(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_record(self) -> str:
        return format_record(self)


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def format_record(cert: OptimalityCertificate) -> str:
    """One line: condition, residual, tolerance, verdict, multipliers (17 significant digits)."""
    parts = [
        cert.condition,
        f"residual={_fmt(cert.residual)}",
        f"tolerance={_fmt(cert.tolerance)}",
        f"verdict={'pass' if cert.verdict else 'fail'}",
        f"support={','.join(str(i) for i in cert.support.nonzero)}",
    ]
    parts += [f"{k}={_fmt(v)}" for k, v in cert.multipliers.items()]
    return " ".join(parts)


def dumps(certs: Sequence[OptimalityCertificate]) -> str:
    return "".join(format_record(c) + "\n" for c in certs)


def parse_record(line: str) -> dict:
    """Inverse of :func:`format_record` (numbers as floats, support as a list)."""
    head, *fields = line.split()
    out = {"condition": head}
    for f in fields:
        key, val = f.split("=", 1)
        if key == "verdict":
            out[key] = val == "pass"
        elif key == "support":
            out[key] = [int(i) for i in val.split(",")] if val else []
        else:
            out[key] = float(val)
    return out


# --------------------------------------------------------------------------
# helpers


def _constraint_list(constraints) -> List[Constraint]:
    if isinstance(constraints, FeasibleSet):
        if constraints.kind != GENERAL:
            raise TypeError("structured sets have no constraint list")
        return list(constraints.constraints)
    return list(constraints or ())


def as_constraints(gamma: FeasibleSet, n: int) -> List[Constraint]:
    """Smooth-constraint description of a structured set."""
    if gamma.kind == GENERAL:
        return list(gamma.constraints)
    eye = np.eye(n)
    out = []
    if gamma.kind == BOX:
        lo = np.broadcast_to(gamma.lower, (n,))
        hi = np.broadcast_to(gamma.upper, (n,))
        for i in range(n):
            out.append(affine_constraint(-eye[i], -lo[i]))
            out.append(affine_constraint(eye[i], hi[i]))
    if gamma.kind in (NONNEGATIVE, SIMPLEX):
        out += [affine_constraint(-eye[i], 0.0) for i in range(n)]
    if gamma.kind == SIMPLEX:
        out.append(affine_constraint(np.ones(n), gamma.scale, kind=EQUALITY))
    return out


def _active_rows(x, constraints: Sequence[Constraint]):
    """Indices, gradients, kinds and values of equality plus active inequality constraints."""
    idx, grads, kinds, vals = [], [], [], []
    for j, c in enumerate(constraints):
        g = np.asarray(c.gradient(x), dtype=float)
        v = float(c.value(x))
        if c.kind == EQUALITY or is_active(v, g):
            idx.append(j), grads.append(g), kinds.append(c.kind), vals.append(v)
    return idx, grads, kinds, vals


def _check_feasible(x, constraints: FeasibleSet, tol=1e-8):
    viol = constraints.violation(x)
    if viol > tol:
        raise InfeasiblePointError(f"x violates the feasible set by {viol:.3e}")


def _lp_term(x, reg: LpRegularizer, sup: Support, kind: str, mult: MultiplierSet):
    """Coefficient times the support gradient of phi, and the zero-set half-width for p = 1."""
    grad_phi = lp_gradient_on_support(x, reg.p, sup)
    coef = reg.lam if kind == P1 else (mult.ball_multiplier or 0.0)
    return coef * grad_phi, (coef if reg.p == 1.0 else None)


def _stationarity_detail(x, g, lp_part, halfwidth, sup: Support, mult: MultiplierSet,
                         constraints: FeasibleSet, indices=None):
    """Per-index distance of 0 to ``g + lp_part + normal cone`` and complementarity slack.

    ``indices`` restricts the support rows that are evaluated (AKKT uses the
    limit's support).
    """
    nz = sup.nonzero if indices is None else indices
    rows = g[nz] + lp_part
    zeros = sup.zero if (halfwidth is not None and indices is None) else np.array([], dtype=int)
    zrows = g[zeros].copy()
    comp = []
    kind = constraints.kind
    if kind == GENERAL:
        for j, y in mult.as_dict().items():
            c = constraints.constraints[j]
            gj = np.asarray(c.gradient(x), dtype=float)
            rows = rows + y * gj[nz]
            zrows = zrows + y * gj[zeros]
            if c.kind == INEQUALITY:
                comp.append(abs(y * float(c.value(x))))
        lo_n = hi_n = np.zeros(nz.size)
        lo_z = hi_z = np.zeros(zeros.size)
    elif kind == UNCONSTRAINED:
        lo_n = hi_n = np.zeros(nz.size)
        lo_z = hi_z = np.zeros(zeros.size)
    else:
        if kind == SIMPLEX:
            nu = mult.set_dual if mult.set_dual is not None else 0.0
            rows = rows + nu
            zrows = zrows + nu
        lo, hi = constraints.normal_intervals(x, sup.threshold)
        lo_n, hi_n = lo[nz], hi[nz]
        lo_z, hi_z = lo[zeros], hi[zeros]
    detail = interval_distance(-rows, lo_n, hi_n)
    if zeros.size:
        detail = np.concatenate(
            [detail, interval_distance(-zrows, lo_z - halfwidth, hi_z + halfwidth)])
    return np.concatenate([detail, np.array(comp)])


def _validate_multipliers(mult: MultiplierSet, constraints: FeasibleSet):
    if any(v < 0 for v in mult.active_inequality.values()):
        raise ValueError("inequality multipliers must be nonnegative")
    if mult.ball_multiplier is not None and mult.ball_multiplier < 0:
        raise ValueError("the ball multiplier must be nonnegative")
    if constraints.kind == GENERAL:
        cons = constraints.constraints
        for j in list(mult.equality) + list(mult.active_inequality):
            if not 0 <= j < len(cons):
                raise ValueError(f"multiplier for unknown constraint {j}")
        for j in mult.equality:
            if cons[j].kind != EQUALITY:
                raise ValueError(f"constraint {j} is an inequality")
        for j in mult.active_inequality:
            if cons[j].kind != INEQUALITY:
                raise ValueError(f"constraint {j} is an equality")


# --------------------------------------------------------------------------
# KKT residuals


def kkt_residual_p1(x, mult: Optional[MultiplierSet], oracle: SmoothOracle, reg: LpRegularizer,
                    constraints: FeasibleSet, tol: float = 1e-8,
                    threshold: float = 0.0) -> OptimalityCertificate:
    """KKT residual of the regularized problem at ``x``.

    ``mult = None`` fits the multipliers by bounded least squares first.
    """
    x = np.asarray(x, dtype=float)
    _check_feasible(x, constraints)
    if mult is None:
        mult = fit_multipliers(x, oracle, reg, constraints, P1, threshold)
    _validate_multipliers(mult, constraints)
    sup = support(x, threshold)
    g = np.asarray(oracle.gradient(x), dtype=float)
    lp_part, half = _lp_term(x, reg, sup, P1, mult)
    detail = _stationarity_detail(x, g, lp_part, half, sup, mult, constraints)
    res = float(np.max(detail, initial=0.0))
    return OptimalityCertificate(KKT_P1, res, tol, sup, mult, detail)


def kkt_residual_p2(x, mult: Optional[MultiplierSet], oracle: SmoothOracle, reg: LpRegularizer,
                    constraints: FeasibleSet, tol: float = 1e-8,
                    threshold: float = 0.0) -> OptimalityCertificate:
    """KKT residual of the ball-constrained problem at a point on the ball's boundary."""
    x = np.asarray(x, dtype=float)
    if reg.theta is None:
        raise ValueError("the ball-constrained problem needs a radius theta")
    val = phi(x, reg.p)
    btol = boundary_tolerance(reg.theta)
    if val > reg.theta + btol:
        raise InfeasiblePointError(f"phi(x) = {val!r} exceeds theta = {reg.theta!r}")
    if val < reg.theta - btol:
        raise ValueError("x is interior to the lp ball; the ball constraint is inactive, "
                         "use the smooth KKT conditions instead")
    _check_feasible(x, constraints)
    if mult is None:
        mult = fit_multipliers(x, oracle, reg, constraints, P2, threshold)
    _validate_multipliers(mult, constraints)
    sup = support(x, threshold)
    g = np.asarray(oracle.gradient(x), dtype=float)
    lp_part, half = _lp_term(x, reg, sup, P2, mult)
    detail = _stationarity_detail(x, g, lp_part, half, sup, mult, constraints)
    res = float(np.max(detail, initial=0.0))
    note = "unconstrained-set case" if constraints.kind == UNCONSTRAINED else ""
    return OptimalityCertificate(KKT_P2, res, tol, sup, mult, detail, note)


def fit_multipliers(x, oracle: SmoothOracle, reg: LpRegularizer, constraints: FeasibleSet,
                    problem_kind: str = P1, threshold: float = 0.0) -> MultiplierSet:
    """Least-squares multipliers for the support stationarity system.

    Sign restrictions (inequalities, ball multiplier) are enforced as bounds.
    A rank-deficient gradient block is logged and flagged, not raised.
    """
    x = np.asarray(x, dtype=float)
    sup = support(x, threshold)
    if sup.size == 0:
        raise ValueError("cannot fit multipliers on an empty support")
    nz = sup.nonzero
    g = np.asarray(oracle.gradient(x), dtype=float)
    grad_phi = lp_gradient_on_support(x, reg.p, sup)
    b = -g[nz]
    if problem_kind == P1:
        b = b - reg.lam * grad_phi
    cols, lower, labels = [], [], []
    if problem_kind == P2:
        cols.append(grad_phi), lower.append(0.0), labels.append(("ball", None))
    if constraints.kind == SIMPLEX:
        cols.append(np.ones(nz.size)), lower.append(-np.inf), labels.append(("nu", None))
    elif constraints.kind == GENERAL:
        idx, grads, kinds, _ = _active_rows(x, constraints.constraints)
        for j, gj, k in zip(idx, grads, kinds):
            cols.append(gj[nz])
            lower.append(-np.inf if k == EQUALITY else 0.0)
            labels.append((k, j))
    if not cols:
        return MultiplierSet()
    y, degenerate = bounded_lstsq(np.array(cols).T, b, np.array(lower))
    if degenerate:
        log.warning("rank-deficient gradient block on the support; multipliers not unique")
    mult = MultiplierSet(degenerate=degenerate)
    for (kind, j), v in zip(labels, y):
        if kind == "ball":
            mult.ball_multiplier = float(max(v, 0.0))
        elif kind == "nu":
            mult.set_dual = float(v)
        elif kind == EQUALITY:
            mult.equality[j] = float(v)
        else:
            mult.active_inequality[j] = float(max(v, 0.0))
    return mult


# --------------------------------------------------------------------------
# sequential (AKKT) certification


@dataclass
class AKKTResult:
    residuals: np.ndarray
    tolerance: float
    tail: int
    support: Support
    eccp: str
    vacuous: bool = False

    @property
    def tail_max(self) -> float:
        if self.residuals.size == 0:
            return 0.0
        return float(np.max(self.residuals[-self.tail:]))

    @property
    def verdict(self) -> bool:
        return self.vacuous or self.tail_max < self.tolerance

    def certificate(self) -> OptimalityCertificate:
        return OptimalityCertificate(AKKT, self.tail_max, self.tolerance, self.support,
                                     MultiplierSet(), self.residuals[-self.tail:], self.eccp)


def eccp_sufficient_condition(x, reg: LpRegularizer, constraints: FeasibleSet,
                              problem_kind: str = P1) -> str:
    """Which sufficient condition for the cone-continuity property is met, if any.

    ``"convex-set"`` when Gamma is convex and no horizon obstruction exists,
    ``"emfcq"`` when the extended MFCQ holds, ``"none"`` otherwise.  The
    property itself is not decided.
    """
    if problem_kind == P1 and constraints.convex and horizon_obstruction(x, reg, constraints) is None:
        return "convex-set"
    if constraints.kind == GENERAL or problem_kind == P2:
        cons = as_constraints(constraints, np.asarray(x).size)
        try:
            if emfcq_check(x, cons, reg, problem_kind).passed:
                return "emfcq"
        except ValueError:
            pass
    return "none"


def akkt_certify(iterates, limit, oracle: SmoothOracle, reg: LpRegularizer,
                 constraints: FeasibleSet, problem_kind: str = P1, tol: float = 1e-6,
                 tail: int = 10, threshold: float = 0.0) -> AKKTResult:
    """Stationarity residual of each ``(x^k, multipliers^k)`` on the limit's support.

    Multipliers of constraints that are inactive at the limit are dropped.
    """
    limit = np.asarray(limit, dtype=float)
    if not iterates:
        raise ValueError("empty iterate sequence")
    last = np.asarray(iterates[-1][0], dtype=float)
    if np.linalg.norm(last - limit) >= 1e-6:
        raise ValueError("iterates do not approach the given limit")
    sup = support(limit, threshold)
    eccp = eccp_sufficient_condition(limit, reg, constraints, problem_kind)
    if sup.size == 0:
        warnings.warn("limit has empty support; the AKKT condition holds vacuously")
        return AKKTResult(np.zeros(len(iterates)), tol, tail, sup, eccp, vacuous=True)

    keep = None
    if constraints.kind == GENERAL:
        keep = set(_active_rows(limit, constraints.constraints)[0])
    nz = sup.nonzero
    out = np.empty(len(iterates))
    for k, (xk, mk) in enumerate(iterates):
        xk = np.asarray(xk, dtype=float)
        if np.any(np.abs(xk[nz]) <= threshold):
            out[k] = np.inf
            continue
        if keep is not None:
            mk = MultiplierSet(
                equality={j: v for j, v in mk.equality.items() if j in keep},
                active_inequality={j: v for j, v in mk.active_inequality.items() if j in keep},
                ball_multiplier=mk.ball_multiplier, set_dual=mk.set_dual)
        g = np.asarray(oracle.gradient(xk), dtype=float)
        sk = Support(nz, np.setdiff1d(np.arange(xk.size), nz), threshold)
        lp_part, _ = _lp_term(xk, reg, sk, problem_kind, mk)
        detail = _stationarity_detail(xk, g, lp_part, None, sk, mk, constraints, indices=nz)
        out[k] = float(np.max(detail[:nz.size]))
    return AKKTResult(out, tol, tail, sup, eccp)


# --------------------------------------------------------------------------
# constraint qualification and the horizon test


@dataclass
class EMFCQResult:
    passed: bool
    witness: Optional[np.ndarray]
    sigma: float
    reason: str
    active: List[int]

    def certificate(self, x, threshold: float = 0.0) -> OptimalityCertificate:
        return OptimalityCertificate(EMFCQ, 0.0 if self.passed else 1.0, 0.0,
                                     support(x, threshold), MultiplierSet(),
                                     np.array([self.sigma]), self.reason)


SIGMA_TOL = 1e-10


def emfcq_check(x, constraints, reg: LpRegularizer, problem_kind: str = P1,
                threshold: float = 0.0) -> EMFCQResult:
    """Extended MFCQ on the support subspace.

    (i) support-restricted gradients of equality and active inequality
    constraints (plus the lp-ball row for ``p2``) are linearly independent;
    (ii) some ``d`` with ``||d||_inf <= 1`` makes the equality rows vanish and
    every inequality row strictly negative, decided by maximising a common
    slack sigma in a small LP.
    """
    x = np.asarray(x, dtype=float)
    cons = _constraint_list(constraints)
    sup = support(x, threshold)
    if sup.size == 0:
        return EMFCQResult(False, None, 0.0, "empty support: no subspace to qualify", [])
    nz = sup.nonzero
    idx, grads, kinds, _ = _active_rows(x, cons)
    eq = [g[nz] for g, k in zip(grads, kinds) if k == EQUALITY]
    ineq = [g[nz] for g, k in zip(grads, kinds) if k != EQUALITY]
    if problem_kind == P2:
        ineq.append(reg.p * np.sign(x[nz]) * np.abs(x[nz]) ** (reg.p - 1.0))
    rows = eq + ineq
    if rows:
        sv = np.linalg.svd(np.array(rows), compute_uv=False)
        if len(rows) > nz.size or sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
            return EMFCQResult(False, None, 0.0,
                               "support-restricted gradients are linearly dependent", idx)

    # variables u = d + 1 in [0, 2] and sigma in [0, 1]; maximise sigma
    m = nz.size
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = [np.concatenate([np.eye(m), np.zeros((m, 1))], axis=1)]
    b_ub = [np.full(m, 2.0)]
    sig = np.zeros((1, m + 1))
    sig[0, -1] = 1.0
    A_ub.append(sig)
    b_ub.append(np.ones(1))
    if ineq:
        G = np.array(ineq)
        A_ub.append(np.concatenate([G, np.ones((len(ineq), 1))], axis=1))
        b_ub.append(G.sum(axis=1))
    A_eq = b_eq = None
    if eq:
        E = np.array(eq)
        A_eq = np.concatenate([E, np.zeros((len(eq), 1))], axis=1)
        b_eq = E.sum(axis=1)
    res = linprog(c, np.vstack(A_ub), np.concatenate(b_ub), A_eq, b_eq)
    if not res.success:
        return EMFCQResult(False, None, 0.0, f"direction program {res.status}", idx)
    sigma = float(res.x[-1])
    if sigma > SIGMA_TOL:
        d = np.zeros(x.size)
        d[nz] = res.x[:m] - 1.0
        return EMFCQResult(True, d, sigma, "qualified", idx)
    return EMFCQResult(False, None, sigma, "no strictly feasible direction", idx)


def horizon_obstruction(x, reg: LpRegularizer, constraints: FeasibleSet,
                        threshold: float = 0.0) -> Optional[np.ndarray]:
    """A nonzero ``v`` in the horizon subdifferential of phi with ``-v`` normal to Gamma.

    Such a ``v`` vanishes on the support.  Returns ``None`` when none exists,
    in which case the plain stationarity condition is a valid necessary
    condition at ``x``.
    """
    x = np.asarray(x, dtype=float)
    if reg.p == 1.0:
        return None
    sup = support(x, threshold)
    if sup.zero.size == 0 or constraints.kind == UNCONSTRAINED:
        return None
    n = x.size
    if constraints.structured:
        if constraints.kind == SIMPLEX and sup.size == 0:
            return None
        lo, hi = constraints.normal_intervals(x, threshold)
        for i in sup.zero:
            v = np.zeros(n)
            if lo[i] < 0:
                v[i] = 1.0
                return v
            if hi[i] > 0:
                v[i] = -1.0
                return v
        return None

    idx, grads, kinds, _ = _active_rows(x, constraints.constraints)
    if not idx:
        return None
    J = np.array(grads)
    free = np.array([k == EQUALITY for k in kinds])
    # y = y_plus - y_minus for equalities; columns [y_all, y_minus(eq)]
    B = np.concatenate([J, -J[free]], axis=0).T
    nz = sup.nonzero
    for i in sup.zero:
        for sign in (1.0, -1.0):
            A_eq = B[nz] if nz.size else None
            b_eq = np.zeros(nz.size) if nz.size else None
            res = linprog(np.zeros(B.shape[1]), -sign * B[i][None, :], np.array([-1.0]),
                          A_eq, b_eq)
            if res.success:
                y = res.x
                v = -(B @ y)
                v[nz] = 0.0
                return v
    return None


def alpha_residual(x, nu: float, R, c, reg: LpRegularizer) -> float:
    """Support-summed stationarity violation of the simplex-constrained quadratic model.

    ``sum_{x_i != 0} |(R x)_i - c_i + lam p x_i^(p-1) + nu|``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    nz = np.flatnonzero(x)
    if nz.size == 0:
        raise ValueError("x has empty support")
    R = np.asarray(R, dtype=float)
    terms = R[nz] @ x - np.asarray(c, dtype=float)[nz] + reg.lam * reg.p * x[nz] ** (reg.p - 1.0) + nu
    return float(np.sum(np.abs(terms)))
