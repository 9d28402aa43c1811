"""Synthetic price universes for golden runs and self-consistency tests.

Each ticker compounds daily shocks drawn from its own asymmetric
heavy-tail model: X_t = X_0 * exp(sum of (drift + vol * z)).  Exponential
compounding keeps prices positive under arbitrarily heavy-tailed draws; a
zero-drift symmetric spec therefore has median terminal price equal to the
start price.  A ticker may instead clone another's path exactly (useful
for market-neutrality checks).  Generation is bit-deterministic given the
master seed, independent of ticker order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .backtest import PriceSeries
from .distributions import AsymmetricDist, QGaussianParams
from .errors import DomainError
from .seeds import derive_seed

__all__ = ["TickerSpec", "UniverseSpec", "generate_universe", "write_universe"]


@dataclass(frozen=True)
class TickerSpec:
    """Generation parameters for one ticker's daily shocks."""

    ticker: str
    q_minus: float = 1.4
    b_minus: float = 1.0
    q_plus: float = 1.3
    b_plus: float = 1.0
    drift: float = 0.0  # per-day log-drift
    vol: float = 0.01  # scale applied to model draws
    start_price: float = 100.0
    clone_of: str | None = None

    def dist(self) -> AsymmetricDist:
        return AsymmetricDist(
            QGaussianParams(self.q_minus, self.b_minus),
            QGaussianParams(self.q_plus, self.b_plus),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "TickerSpec":
        return cls(**d)


@dataclass(frozen=True)
class UniverseSpec:
    """A market ticker plus its constituents on a shared business-day
    calendar starting at `start` with `days` trading days."""

    start: str
    days: int
    market: TickerSpec
    tickers: tuple[TickerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.days < 2:
            raise ValueError("calendar needs at least 2 days")
        names = [self.market.ticker] + [t.ticker for t in self.tickers]
        if len(names) != len(set(names)):
            raise ValueError("duplicate tickers in universe spec")

    @classmethod
    def from_dict(cls, d: dict) -> "UniverseSpec":
        return cls(
            start=d["start"],
            days=int(d["days"]),
            market=TickerSpec.from_dict(d["market"]),
            tickers=tuple(TickerSpec.from_dict(t) for t in d.get("tickers", [])),
        )

    @classmethod
    def from_json(cls, path) -> "UniverseSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _calendar(start: str, days: int) -> np.ndarray:
    first = np.datetime64(start, "D")
    # roll forward to a business day, then take the next `days` business days
    first = np.busday_offset(first, 0, roll="forward")
    return np.busday_offset(first, np.arange(days), roll="forward")


def _path(spec: TickerSpec, days: int, seed: int) -> np.ndarray:
    dist = spec.dist()
    z = dist.sample(days - 1, seed=seed)
    try:
        # mean-center the shocks so `drift` alone sets the expected
        # log-return even for asymmetric branch pairs
        center = dist.mean()
    except DomainError:
        center = 0.0  # q >= 2 branch: mean undefined, keep the median-zero draws
    log_steps = spec.drift + spec.vol * (z - center)
    log_prices = np.concatenate([[0.0], np.cumsum(log_steps)])
    return spec.start_price * np.exp(log_prices)


def generate_universe(spec: UniverseSpec, master_seed: int) -> tuple[PriceSeries, list[PriceSeries]]:
    """Generate (market, constituents) price series for a universe spec."""
    dates = _calendar(spec.start, spec.days)
    paths: dict[str, np.ndarray] = {}
    order = [spec.market] + list(spec.tickers)
    # non-clones first so clones can reference them regardless of order
    for t in order:
        if t.clone_of is None:
            paths[t.ticker] = _path(t, spec.days, derive_seed(master_seed, "ticker", t.ticker))
    for t in order:
        if t.clone_of is not None:
            if t.clone_of not in paths:
                raise ValueError(f"{t.ticker}: clone_of {t.clone_of!r} not found")
            paths[t.ticker] = paths[t.clone_of].copy()
    market = PriceSeries(spec.market.ticker, dates, paths[spec.market.ticker])
    constituents = [PriceSeries(t.ticker, dates, paths[t.ticker]) for t in spec.tickers]
    return market, constituents


def write_universe(spec: UniverseSpec, master_seed: int, out_dir) -> dict:
    """Write per-ticker price CSVs plus a backtest manifest; returns the
    manifest dict."""
    market, constituents = generate_universe(spec, master_seed)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for series, is_market in [(market, True)] + [(s, False) for s in constituents]:
        path = os.path.join(out_dir, f"{series.ticker}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("date,adj_close\n")
            for d, p in zip(series.dates, series.adj_close):
                fh.write(f"{d},{float(p)!r}\n")
        if not is_market:
            entries.append(dict(ticker=series.ticker, path=f"{series.ticker}.csv", constituent=True))
    manifest = dict(
        market=dict(ticker=market.ticker, path=f"{market.ticker}.csv"),
        tickers=entries,
    )
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
