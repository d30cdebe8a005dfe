"""Smooth function oracles: objective f0 and constraint functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

INEQUALITY = "inequality"
EQUALITY = "equality"


@dataclass(frozen=True)
class SmoothOracle:
    """Value/gradient bundle for a continuously differentiable function.

    ``lipschitz`` is the declared Lipschitz constant of the gradient.  When
    the function is a quadratic ``0.5 x'Hx - c'x + const`` the Hessian is kept
    in ``matrix`` so the constant can be computed instead of declared.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: Optional[float] = None
    matrix: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class Constraint:
    """A smooth constraint ``f(x) <= 0`` (inequality) or ``f(x) = 0`` (equality)."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    kind: str = INEQUALITY

    def __post_init__(self):
        if self.kind not in (INEQUALITY, EQUALITY):
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    def scaled(self, factor: float) -> "Constraint":
        """Same constraint set, with the function multiplied by ``factor > 0``."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return Constraint(
            value=lambda x: factor * self.value(x),
            gradient=lambda x: factor * np.asarray(self.gradient(x)),
            kind=self.kind,
        )


def quadratic(H, c=None, const: float = 0.0) -> SmoothOracle:
    """Oracle for ``0.5 x'Hx - c'x + const`` with symmetric ``H``."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)

    def value(x):
        return 0.5 * x @ (H @ x) - c @ x + const

    def gradient(x):
        return H @ x - c

    return SmoothOracle(value=value, gradient=gradient, matrix=H)


def linear(c) -> SmoothOracle:
    c = np.asarray(c, dtype=float)
    return SmoothOracle(value=lambda x: float(c @ x), gradient=lambda x: c.copy(),
                        lipschitz=0.0)


def zero(n: int) -> SmoothOracle:
    return SmoothOracle(value=lambda x: 0.0, gradient=lambda x: np.zeros(n),
                        lipschitz=0.0)


def affine_constraint(a, b: float, kind: str = INEQUALITY) -> Constraint:
    """``a'x - b <= 0`` or ``a'x - b = 0``."""
    a = np.asarray(a, dtype=float)
    return Constraint(value=lambda x: float(a @ x - b), gradient=lambda x: a.copy(),
                      kind=kind)


def ball_constraint(center, radius: float) -> Constraint:
    """``||x - center||^2 - radius^2 <= 0``."""
    center = np.asarray(center, dtype=float)
    r2 = float(radius) ** 2
    return Constraint(
        value=lambda x: float((x - center) @ (x - center) - r2),
        gradient=lambda x: 2.0 * (x - center),
        kind=INEQUALITY,
    )
