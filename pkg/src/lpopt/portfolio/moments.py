"""Return moments of a price panel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..solver import power_iteration
from .data import PriceDataError, PricePanel


@dataclass
class MomentEstimates:
    R: np.ndarray
    mu: np.ndarray
    Lf: float
    top_vector: np.ndarray


def daily_returns(panel: PricePanel) -> np.ndarray:
    """Simple returns ``p_t / p_{t-1} - 1``, shape ``(T-1, n)``."""
    P = panel.prices
    if P.shape[0] < 2:
        raise PriceDataError("need at least 2 dates")
    if np.any(np.isnan(P)):
        raise PriceDataError("panel has missing prices; screen and fill it first")
    if np.any(P <= 0):
        raise PriceDataError("prices must be positive")
    return P[1:] / P[:-1] - 1.0


def estimate_moments(panel: PricePanel) -> MomentEstimates:
    """Sample mean and (1/(T-1)-normalised) covariance of daily returns."""
    r = daily_returns(panel)
    T = r.shape[0]
    mu = r.mean(axis=0)
    if T < 2:
        R = np.zeros((r.shape[1], r.shape[1]))
    else:
        d = r - mu
        R = d.T @ d / (T - 1)
        R = 0.5 * (R + R.T)
    Lf, v = power_iteration(R)
    return MomentEstimates(R=R, mu=mu, Lf=Lf, top_vector=v)
