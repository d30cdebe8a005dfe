"""lp-regularized no-shorting Markowitz experiment over a grid of penalties

    minimise 0.5 x'Rx - eta mu'x + lam ||x||_p^p   s.t.  e'x = 1, x >= 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..calculus import LpRegularizer
from ..optimality import alpha_residual
from ..oracles import quadratic
from ..solver import ReweightedL1Solver, SolveReport, SolverError, SolverParams
from ..subproblems import FeasibleSet
from .data import PricePanel
from .moments import MomentEstimates, daily_returns, estimate_moments

TRADING_DAYS = 252


class ExperimentError(SolverError):
    def __init__(self, lam: float, cause: Exception):
        super().__init__(f"solver aborted for lambda={lam!r}: {cause}")
        self.lam = lam
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    eta: float = 0.001
    p: float = 0.5
    lambdas: Sequence[float] = (0.001,)
    primary_lambda: float = 0.001
    solver: SolverParams = field(default_factory=SolverParams)


@dataclass
class ExperimentResult:
    tickers: List[str]
    lambda_grid: List[float]
    weights: List[np.ndarray]
    nnz: List[int]
    residual_trace: np.ndarray
    primary_lambda: Optional[float]
    sharpe_in: List[tuple]
    sharpe_out: List[tuple]
    reports: List[SolveReport] = field(default_factory=list, repr=False)


def portfolio_oracle(moments: MomentEstimates, eta: float):
    """Smooth part ``0.5 x'Rx - eta mu'x`` with its Hessian attached."""
    return quadratic(moments.R, eta * moments.mu)


def sharpe_ratio(returns, weights) -> tuple:
    """Daily Sharpe ratio (mean / sample stdev of portfolio returns) and its sqrt(252) scaling."""
    pr = np.asarray(returns, dtype=float) @ np.asarray(weights, dtype=float)
    if pr.size < 2:
        return math.nan, math.nan
    sd = float(np.std(pr, ddof=1))
    daily = float(np.mean(pr)) / sd if sd > 0 else math.nan
    return daily, daily * math.sqrt(TRADING_DAYS)


def run_experiment(panel_in: PricePanel, panel_out: Optional[PricePanel],
                   config: ExperimentConfig) -> ExperimentResult:
    moments = estimate_moments(panel_in)
    oracle = portfolio_oracle(moments, config.eta)
    c = config.eta * moments.mu
    n = panel_in.n_assets
    gamma = FeasibleSet.simplex(1.0)
    x0 = np.full(n, 1.0 / n)
    lambdas = [float(v) for v in config.lambdas]
    primary = None
    if lambdas:
        primary = config.primary_lambda if config.primary_lambda in lambdas else lambdas[0]
    r_in = daily_returns(panel_in)
    r_out = daily_returns(panel_out) if panel_out is not None else None
    if r_out is not None and list(panel_out.tickers) != list(panel_in.tickers):
        raise ValueError("out-of-sample panel must carry the same tickers")

    weights, nnz, sh_in, sh_out, reports = [], [], [], [], []
    trace = np.zeros(0)
    for lam in lambdas:
        reg = LpRegularizer(config.p, lam=lam)
        alphas = []

        def record(k, x, sol, reg=reg, alphas=alphas):
            alphas.append(alpha_residual(x, sol.equality_dual, moments.R, c, reg))

        try:
            rep = ReweightedL1Solver(config.solver).solve(
                oracle, reg, gamma, x0, lipschitz=moments.Lf,
                callback=record if lam == primary else None, record_iterates=False)
        except SolverError as exc:
            raise ExperimentError(lam, exc) from exc
        if lam == primary:
            trace = np.array(alphas)
        weights.append(rep.x)
        nnz.append(int(np.count_nonzero(rep.x)))
        sh_in.append(sharpe_ratio(r_in, rep.x))
        sh_out.append(sharpe_ratio(r_out, rep.x) if r_out is not None else (math.nan, math.nan))
        reports.append(rep)
    return ExperimentResult(
        tickers=list(panel_in.tickers), lambda_grid=lambdas, weights=weights, nnz=nnz,
        residual_trace=trace, primary_lambda=primary, sharpe_in=sh_in, sharpe_out=sh_out,
        reports=reports,
    )
