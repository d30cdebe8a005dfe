"""Sparse no-shorting Markowitz portfolios with an l_p penalty."""

from .data import PriceDataError, PricePanel, load_prices, synthetic_panels, write_prices
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    ExperimentResult,
    portfolio_oracle,
    run_experiment,
    sharpe_ratio,
)
from .moments import MomentEstimates, daily_returns, estimate_moments
from .reports import emit_reports

__all__ = [
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "MomentEstimates",
    "PriceDataError",
    "PricePanel",
    "daily_returns",
    "emit_reports",
    "estimate_moments",
    "load_prices",
    "portfolio_oracle",
    "run_experiment",
    "sharpe_ratio",
    "synthetic_panels",
    "write_prices",
]
