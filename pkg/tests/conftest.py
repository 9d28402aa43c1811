"""Shared fixtures: small synthetic universes that keep fits fast."""

import numpy as np
import pytest

from qrisk.backtest import CycleConfig, PriceSeries
from qrisk.entropy import RiskKind
from qrisk.simulate import TickerSpec, UniverseSpec, generate_universe


SMALL_CONFIG = CycleConfig(
    window=300,
    fit_lag=10,
    horizon=42,
    shift=42,
    risk_kind=RiskKind.ATRE,
    target_per_bin=3,
    extra_high_bins=2,
    risk_cutoff=10.0,
    master_seed=77,
)


def small_universe_spec(n_tickers: int = 9, days: int = 700) -> UniverseSpec:
    tickers = [
        TickerSpec(
            ticker=f"T{i:02d}",
            q_minus=1.25 + 0.06 * i,
            b_minus=1.0,
            q_plus=1.2 + 0.05 * i,
            b_plus=0.9,
            drift=0.0001 + 0.00005 * i,
            vol=0.012,
        )
        for i in range(n_tickers)
    ]
    tickers.append(TickerSpec(ticker="CLONE", clone_of="MKT"))
    return UniverseSpec(
        start="2010-01-04",
        days=days,
        market=TickerSpec(
            ticker="MKT", q_minus=1.4, b_minus=1.1, q_plus=1.3, b_plus=1.0,
            drift=0.0002, vol=0.012,
        ),
        tickers=tuple(tickers),
    )


@pytest.fixture(scope="session")
def small_universe():
    market, constituents = generate_universe(small_universe_spec(), master_seed=77)
    return market, constituents


@pytest.fixture(scope="session")
def small_config():
    return SMALL_CONFIG


@pytest.fixture(scope="session")
def small_raw(small_universe, small_config):
    from qrisk.backtest import run_cycles

    market, constituents = small_universe
    return run_cycles(constituents, market, small_config)


def price_series_from_log_shocks(ticker: str, start: str, shocks: np.ndarray,
                                 start_price: float = 100.0) -> PriceSeries:
    """Build a PriceSeries by exponential compounding of given log-shocks."""
    days = len(shocks) + 1
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    dates = np.busday_offset(first, np.arange(days), roll="forward")
    prices = start_price * np.exp(np.concatenate([[0.0], np.cumsum(shocks)]))
    return PriceSeries(ticker, dates, prices)
