"""Subdifferential and normal-cone calculus for ``phi(x) = sum |x_i|^p``.

Cones over R^n are kept symbolic: components on the support are pinned (or
pinned up to a common nonnegative scale), components on the zero set are
listed as free indices and never materialised as infinities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

POINT_ZERO = "point-zero"
FIXED_ON_SUPPORT = "fixed-on-support"
RAY_ON_SUPPORT = "ray-on-support"


def boundary_tolerance(theta: float) -> float:
    return 1e-10 * (1.0 + theta)


class InfeasiblePointError(ValueError):
    """Point lies outside the lp ball (beyond the boundary tolerance)."""


@dataclass(frozen=True)
class LpRegularizer:
    """The lp term: exponent ``p`` with either a penalty weight or a ball radius.

    ``lam`` is the penalty weight of the regularized problem, ``theta`` the
    radius of the constrained one.  ``lam = 0`` is accepted and degenerates to
    the smooth problem.
    """

    p: float
    lam: Optional[float] = None
    theta: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if (self.lam is None) == (self.theta is None):
            raise ValueError("exactly one of lam / theta must be given")
        if self.lam is not None and not self.lam >= 0.0:
            raise ValueError("lam must be nonnegative")
        if self.theta is not None and not self.theta > 0.0:
            raise ValueError("theta must be positive")


@dataclass(frozen=True)
class Support:
    nonzero: np.ndarray
    zero: np.ndarray
    threshold: float = 0.0

    @property
    def size(self) -> int:
        return self.nonzero.size


def support(x, threshold: float = 0.0) -> Support:
    """Split indices of ``x`` into ``|x_i| > threshold`` and the rest."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    mag = np.abs(np.asarray(x, dtype=float))
    mask = mag > threshold
    return Support(np.flatnonzero(mask), np.flatnonzero(~mask), float(threshold))


@dataclass(frozen=True)
class ConeDescription:
    """Symbolic description of a subdifferential or normal cone.

    kind:
        ``point-zero``        the singleton {0}
        ``fixed-on-support``  v_i = fixed_values on the support, free elsewhere
        ``ray-on-support``    v_i = t * ray_generator on the support for some
                              t >= 0, free elsewhere
    free_bound:
        None when free components are unrestricted.  For p = 1 the zero set
        carries the interval [-1, 1] (times t for the ray kind) instead.
    """

    kind: str
    support: Support
    free_indices: np.ndarray
    fixed_values: Optional[np.ndarray] = None
    ray_generator: Optional[np.ndarray] = None
    free_bound: Optional[float] = None

    def __post_init__(self):
        if (self.ray_generator is not None) != (self.kind == RAY_ON_SUPPORT):
            raise ValueError("ray_generator is required exactly for ray-on-support")
        if self.fixed_values is not None and not np.all(np.isfinite(self.fixed_values)):
            raise ValueError("fixed values must be finite")

    def contains(self, v, tol: float = 1e-12) -> bool:
        v = np.asarray(v, dtype=float)
        nz = self.support.nonzero
        if self.kind == POINT_ZERO:
            return bool(np.all(np.abs(v) <= tol))
        scale = 1.0
        if self.kind == FIXED_ON_SUPPORT:
            if not np.all(np.abs(v[nz] - self.fixed_values) <= tol):
                return False
        else:
            g = self.ray_generator
            scale = float(v[nz] @ g / (g @ g)) if nz.size else 0.0
            if scale < -tol or not np.all(np.abs(v[nz] - max(scale, 0.0) * g) <= tol):
                return False
        fixed_zero = np.setdiff1d(self.support.zero, self.free_indices)
        if not np.all(np.abs(v[fixed_zero]) <= tol):
            return False
        if self.free_bound is not None:
            bound = self.free_bound * max(scale, 0.0)
            return bool(np.all(np.abs(v[self.free_indices]) <= bound + tol))
        return True


def _check_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


def phi(x, p: float) -> float:
    """``sum_i |x_i|^p``."""
    x = _check_finite(x)
    return float(np.sum(np.abs(x) ** p))


def lp_gradient_on_support(x, p: float, sup: Support) -> np.ndarray:
    """``sign(x_i) p |x_i|^(p-1)`` for i in the support."""
    xs = x[sup.nonzero]
    return np.sign(xs) * p * np.abs(xs) ** (p - 1.0)


def regular_subdifferential(x, p: float, threshold: float = 0.0) -> ConeDescription:
    x = _check_finite(x)
    sup = support(x, threshold)
    return ConeDescription(
        kind=FIXED_ON_SUPPORT,
        support=sup,
        free_indices=sup.zero,
        fixed_values=lp_gradient_on_support(x, p, sup),
        free_bound=1.0 if p == 1.0 else None,
    )


def horizon_subdifferential(x, p: float, threshold: float = 0.0) -> ConeDescription:
    x = _check_finite(x)
    sup = support(x, threshold)
    # |.| is Lipschitz, so for p = 1 the horizon cone collapses to {0}.
    free = sup.zero if p < 1.0 else np.array([], dtype=int)
    return ConeDescription(
        kind=FIXED_ON_SUPPORT,
        support=sup,
        free_indices=free,
        fixed_values=np.zeros(sup.size),
    )


def normal_cone_lp_ball(x, p: float, theta: float, threshold: float = 0.0) -> ConeDescription:
    """Normal cone of ``{phi <= theta}`` at ``x``.

    Interior points give {0}; boundary points give the ray spanned by the
    support gradient of phi, with the zero set free.
    """
    x = _check_finite(x)
    if not theta > 0:
        raise ValueError("theta must be positive")
    val = phi(x, p)
    tol = boundary_tolerance(theta)
    if val > theta + tol:
        raise InfeasiblePointError(f"phi(x) = {val!r} exceeds theta = {theta!r}")
    sup = support(x, threshold)
    if val < theta - tol:
        return ConeDescription(kind=POINT_ZERO, support=sup,
                               free_indices=np.array([], dtype=int))
    return ConeDescription(
        kind=RAY_ON_SUPPORT,
        support=sup,
        free_indices=sup.zero,
        ray_generator=lp_gradient_on_support(x, p, sup),
        free_bound=1.0 if p == 1.0 else None,
    )


def weight(xi: float, eps_i: float, p: float) -> float:
    """Reweighting coefficient ``p (|xi| + eps_i)^(p-1)``."""
    if not eps_i > 0:
        raise ValueError("eps_i must be positive")
    return p * (abs(xi) + eps_i) ** (p - 1.0)


def weights(x, eps, p: float) -> np.ndarray:
    """Vectorised :func:`weight`."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    return p * (np.abs(x) + eps) ** (p - 1.0)


def smoothed_objective(oracle, reg: LpRegularizer, x, eps) -> float:
    """``f0(x) + lam * sum (|x_i| + eps_i)^p``."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    return float(oracle.value(x)) + reg.lam * float(np.sum((np.abs(x) + eps) ** reg.p))
