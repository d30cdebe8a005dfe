"""Daily price panels: wide-CSV ingestion and a synthetic factor-model generator."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

log = logging.getLogger(__name__)

COMPLETENESS = 0.9


class PriceDataError(ValueError):
    """Malformed or unusable price data."""


@dataclass
class PricePanel:
    """Prices on ``dates x tickers``; NaN marks a missing observation."""

    dates: List[dt.date]
    tickers: List[str]
    prices: np.ndarray
    dropped: tuple = ()
    filled: int = 0

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.shape != (len(self.dates), len(self.tickers)):
            raise PriceDataError("price matrix shape does not match dates x tickers")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise PriceDataError("dates must be strictly increasing")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)


def _parse_cell(cell: str, where: str) -> float:
    cell = cell.strip()
    if cell == "":
        return math.nan
    try:
        v = float(cell)
    except ValueError:
        raise PriceDataError(f"unparseable price {cell!r} at {where}") from None
    if not math.isfinite(v):
        raise PriceDataError(f"non-finite price {cell!r} at {where}")
    return v


def screen_and_fill(panel: PricePanel) -> PricePanel:
    """Drop tickers observed on fewer than 90% of dates, then forward-fill gaps.

    A leading gap takes the first observed price.
    """
    P = panel.prices
    observed = np.mean(~np.isnan(P), axis=0)
    keep = observed >= COMPLETENESS
    dropped = tuple(t for t, k in zip(panel.tickers, keep) if not k)
    P = P[:, keep].copy()
    tickers = [t for t, k in zip(panel.tickers, keep) if k]
    if len(tickers) < 2:
        raise PriceDataError(f"only {len(tickers)} ticker(s) survive the completeness screen")
    filled = int(np.isnan(P).sum())
    for j in range(P.shape[1]):
        col = P[:, j]
        first = np.flatnonzero(~np.isnan(col))[0]
        col[:first] = col[first]
        for t in range(first + 1, col.size):
            if np.isnan(col[t]):
                col[t] = col[t - 1]
    if dropped:
        log.info("dropped %d ticker(s) below %.0f%% completeness: %s",
                 len(dropped), 100 * COMPLETENESS, ", ".join(dropped))
    if filled:
        log.info("forward-filled %d missing price(s)", filled)
    return PricePanel(list(panel.dates), tickers, P, dropped=dropped, filled=filled)


def load_prices(path) -> PricePanel:
    """Read a wide CSV: header ``date,<ticker>,...``, one row per trading day."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PriceDataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "date":
        raise PriceDataError(f"{path}: first column must be 'date'")
    tickers = header[1:]
    if len(set(tickers)) != len(tickers):
        raise PriceDataError(f"{path}: duplicate ticker columns")
    dates, prices, seen = [], [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise PriceDataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise PriceDataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        if day in seen:
            raise PriceDataError(f"{path}:{lineno}: duplicate date {day}")
        seen.add(day)
        dates.append(day)
        prices.append([_parse_cell(c, f"{path}:{lineno}") for c in row[1:]])
    if len(dates) < 2:
        raise PriceDataError(f"{path}: need at least 2 dates")
    order = np.argsort(np.array(dates, dtype="datetime64[D]"), kind="stable")
    dates = [dates[i] for i in order]
    P = np.array(prices, dtype=float).reshape(len(order), len(tickers))[order]
    return screen_and_fill(PricePanel(dates, tickers, P))


def write_prices(panel: PricePanel, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for day, row in zip(panel.dates, panel.prices):
            w.writerow([day.isoformat(), *("" if math.isnan(v) else repr(float(v)) for v in row)])


def business_days(start: dt.date, count: int) -> List[dt.date]:
    out, day = [], start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def synthetic_panels(seed: int = 0, n_assets: int = 50, n_days: int = 251,
                     n_oos_days: int = 61, n_factors: int = 3):
    """In-sample and out-of-sample panels from a fixed-seed factor model.

    Daily returns are ``B f_t + noise_t + drift``; the out-of-sample panel
    continues the same price paths.
    """
    rng = np.random.default_rng(seed)
    B = rng.normal(0.0, 0.5, size=(n_assets, n_factors))
    B[:, 0] = rng.normal(1.0, 0.3, size=n_assets)
    factor_vol = np.array([0.01] + [0.005] * (n_factors - 1))
    idio_vol = rng.uniform(0.01, 0.03, size=n_assets)
    drift = rng.normal(4e-4, 6e-4, size=n_assets)
    total = n_days + n_oos_days
    f = rng.normal(size=(total - 1, n_factors)) * factor_vol
    eps = rng.normal(size=(total - 1, n_assets)) * idio_vol
    r = f @ B.T + eps + drift
    p0 = rng.uniform(20.0, 200.0, size=n_assets)
    prices = np.vstack([p0, p0 * np.cumprod(1.0 + r, axis=0)])
    dates = business_days(dt.date(2013, 1, 2), total)
    tickers = [f"S{i:03d}" for i in range(n_assets)]
    panel_in = PricePanel(dates[:n_days], tickers, prices[:n_days])
    panel_out = PricePanel(dates[n_days - 1:], tickers, prices[n_days - 1:])
    return panel_in, panel_out
