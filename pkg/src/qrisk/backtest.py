"""Six-month-cycle portfolio backtest on relative-entropy risk measures.

Protocol per cycle: fit the market and every admitted equity on the
overlapping 10-day returns of the trailing estimation window, score each
equity's risk against the market fit, bin by risk (bin edges frozen after
the first cycle, two spare bins above the first-cycle maximum), and record
each bin's equal-weight excess return over the market for the six-month
forward window.  Cycle starts then advance by the turnover period.

Everything here is deterministic: fits contain no randomness, cycles
aggregate in sorted-ticker order, and repeated runs produce byte-identical
reports regardless of worker count.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .distributions import AsymmetricDist, QGaussianParams
from .entropy import RiskKind, atre, branch_entropy, tre_symmetric
from .errors import (
    AllBinsEmpty,
    DegenerateRisks,
    DegenerateX,
    DegenerateY,
    DomainError,
    EmptySeries,
    InsufficientData,
    InsufficientOverlap,
    InsufficientSpan,
    NonMonotoneDates,
    ParseError,
    QRiskError,
    SeriesTooShort,
    ZeroMarketVariance,
)
from .estimation import fit_centered, fit_scale_given_shape, fit_symmetric, standardize

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "CycleConfig",
    "BinSpec",
    "TickerCycleRecord",
    "CycleResult",
    "RawBacktest",
    "Profile",
    "load_prices",
    "compute_returns",
    "capm_beta",
    "capm_alpha_beta",
    "build_bins",
    "linear_fit_chi2",
    "BacktestEngine",
    "run_cycles",
    "aggregate_profile",
    "profile_for_kind",
    "percentile_track",
    "cumulative_earnings",
    "PercentileStrategy",
    "FixedRiskStrategy",
]

TRADING_MONTH = 21
TRADING_HALF_YEAR = 126
ENTROPY_KINDS = (RiskKind.ATRE, RiskKind.S_MINUS, RiskKind.S_PLUS, RiskKind.TRE_SYM)


# -- price/return plumbing ------------------------------------------------------


@dataclass(frozen=True)
class PriceSeries:
    """Split/dividend-adjusted closes on strictly increasing dates."""

    ticker: str
    dates: np.ndarray  # datetime64[D]
    adj_close: np.ndarray
    has_gaps: bool = False

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        prices = np.asarray(self.adj_close, dtype=float)
        if len(dates) != len(prices):
            raise ValueError("dates and prices must align")
        if len(dates) == 0:
            raise EmptySeries(f"{self.ticker}: no rows")
        if np.any(np.diff(dates).astype(int) <= 0):
            raise NonMonotoneDates(f"{self.ticker}: dates must be strictly increasing")
        if np.any(~np.isfinite(prices)) or np.any(prices <= 0.0):
            raise ValueError(f"{self.ticker}: prices must be positive")
        gaps = bool(
            len(dates) > 1
            and np.busday_count(dates[0], dates[-1]) + 1 != len(dates)
        )
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "adj_close", prices)
        object.__setattr__(self, "has_gaps", gaps)

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Percent returns (X_t - X_{t-tau})/X_{t-tau} at a fixed trading-day lag."""

    ticker: str
    dates: np.ndarray
    returns: np.ndarray
    lag_days: int


_PRICE_HEADERS = {"adj_close", "adjusted_close", "adjusted close", "adjclose", "close"}


def load_prices(source, ticker: str | None = None) -> PriceSeries:
    """Read one ticker's (date, adjusted close) CSV.

    `source` is a path or an open text stream.  Rows with missing,
    non-numeric, or non-positive prices are rejected with their 1-based row
    number; dates must be ISO-8601 and strictly increasing.
    """
    if hasattr(source, "read"):
        stream = source
        name = getattr(source, "name", "<stream>")
        close = False
    else:
        name = str(source)
        stream = open(source, "r", newline="")
        close = True
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{name}: empty file") from None
        cols = [h.strip().lower() for h in header]
        if len(cols) < 2 or cols[0] != "date":
            raise ParseError(f"{name}: header must be (date, adjusted close)", row=1)
        try:
            price_col = next(i for i, c in enumerate(cols) if c in _PRICE_HEADERS)
        except StopIteration:
            raise ParseError(
                f"{name}: no adjusted-close column among {cols!r}", row=1
            ) from None
        dates: list[np.datetime64] = []
        prices: list[float] = []
        for idx, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= price_col:
                raise ParseError(f"{name}: row has too few fields", row=idx)
            try:
                date = np.datetime64(row[0].strip(), "D")
            except ValueError:
                raise ParseError(f"{name}: bad date {row[0]!r}", row=idx) from None
            raw = row[price_col].strip()
            try:
                price = float(raw)
            except ValueError:
                raise ParseError(f"{name}: bad price {raw!r}", row=idx) from None
            if not np.isfinite(price) or price <= 0.0:
                raise ParseError(f"{name}: non-positive price {raw!r}", row=idx)
            dates.append(date)
            prices.append(price)
        if not dates:
            raise EmptySeries(f"{name}: no data rows")
        if ticker is None:
            base = os.path.basename(name)
            ticker = os.path.splitext(base)[0] or "<unknown>"
        return PriceSeries(ticker, np.array(dates), np.array(prices))
    finally:
        if close:
            stream.close()


def compute_returns(prices: PriceSeries, lag_days: int) -> ReturnSeries:
    """Overlapping rolling percent returns at the given trading-day lag."""
    if lag_days < 1:
        raise ValueError("lag must be at least 1 day")
    if len(prices) <= lag_days:
        raise SeriesTooShort(
            f"{prices.ticker}: {len(prices)} prices cannot support lag {lag_days}"
        )
    x = prices.adj_close
    rets = (x[lag_days:] - x[:-lag_days]) / x[:-lag_days]
    return ReturnSeries(prices.ticker, prices.dates[lag_days:], rets, lag_days)


def _align(a: ReturnSeries, b: ReturnSeries) -> tuple[np.ndarray, np.ndarray]:
    common, ia, ib = np.intersect1d(a.dates, b.dates, return_indices=True)
    return a.returns[ia], b.returns[ib]


def capm_alpha_beta(equity: ReturnSeries, market: ReturnSeries) -> tuple[float, float]:
    """Regression intercept and slope of equity on market returns."""
    e, m = _align(equity, market)
    if len(e) < 30:
        raise InsufficientOverlap(
            f"{equity.ticker} vs {market.ticker}: only {len(e)} overlapping returns"
        )
    var_m = float(np.var(m, ddof=1))
    if var_m <= 0.0:
        raise ZeroMarketVariance("market returns are constant")
    cov = float(np.cov(e, m, ddof=1)[0, 1])
    beta = cov / var_m
    alpha = float(np.mean(e)) - beta * float(np.mean(m))
    return alpha, beta


def capm_beta(equity: ReturnSeries, market: ReturnSeries) -> float:
    """Correlation-scaled volatility ratio against the market."""
    return capm_alpha_beta(equity, market)[1]


# -- binning ---------------------------------------------------------------------


@dataclass(frozen=True)
class BinSpec:
    """Frozen risk-bin edges; the top `extra_high_bins` bins sit above the
    first cycle's maximum to catch later, riskier regimes."""

    edges: np.ndarray
    extra_high_bins: int = 2

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if len(edges) < 2 or np.any(np.diff(edges) <= 0.0):
            raise ValueError("bin edges must be strictly ascending")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def assign(self, risk: float) -> int | None:
        """Bin index of a risk value, or None when out of range."""
        if not np.isfinite(risk) or risk < self.edges[0] or risk > self.edges[-1]:
            return None
        idx = int(np.searchsorted(self.edges, risk, side="right")) - 1
        return min(idx, self.n_bins - 1)


def build_bins(first_cycle_risks, target_per_bin: int, extra_high_bins: int = 2) -> BinSpec:
    """Quantile bin edges from the first cycle's risks.

    Interior edges give about `target_per_bin` members per bin in cycle
    one; `extra_high_bins` equal-width bins are appended above the maximum.
    Edges never change afterwards.
    """
    risks = np.asarray(first_cycle_risks, dtype=float)
    risks = risks[np.isfinite(risks)]
    if len(risks) < 3 * target_per_bin:
        raise InsufficientData(
            f"need at least {3 * target_per_bin} risks to build bins, got {len(risks)}"
        )
    lo, hi = float(np.min(risks)), float(np.max(risks))
    if hi <= lo:
        raise DegenerateRisks("all first-cycle risks are equal")
    n_interior = max(3, len(risks) // target_per_bin)
    edges = np.quantile(risks, np.linspace(0.0, 1.0, n_interior + 1))
    # the first cycle's maximum must land in the top interior bin, not the
    # first spare bin, under the half-open assignment convention
    edges[n_interior] = np.nextafter(hi, np.inf)
    width = (hi - lo) / n_interior
    extras = hi + width * np.arange(1, extra_high_bins + 1)
    edges = np.concatenate([edges, extras])
    # quantile ties would break strict monotonicity; nudge duplicates up
    for i in range(1, len(edges)):
        if edges[i] <= edges[i - 1]:
            edges[i] = np.nextafter(edges[i - 1], np.inf)
    return BinSpec(edges, extra_high_bins=extra_high_bins)


def linear_fit_chi2(s, e) -> tuple[float, float, float]:
    """Least-squares line through (s, e) plus the fit-quality statistic
    1 - SS_res/SS_tot (1 exactly for a perfect line, never above 1)."""
    s = np.asarray(s, dtype=float)
    e = np.asarray(e, dtype=float)
    if len(s) != len(e):
        raise ValueError("s and e must have the same length")
    if len(s) < 3:
        raise InsufficientData(f"line fit needs at least 3 points, got {len(s)}")
    if np.ptp(s) == 0.0:
        raise DegenerateX("all risk values are equal")
    ss_tot = float(np.sum((e - np.mean(e)) ** 2))
    if ss_tot == 0.0:
        raise DegenerateY("all returns are equal; fit-quality denominator is zero")
    p1, p0 = np.polyfit(s, e, 1)
    ss_res = float(np.sum((e - (p0 + p1 * s)) ** 2))
    return float(p0), float(p1), 1.0 - ss_res / ss_tot


# -- cycle engine ----------------------------------------------------------------


@dataclass(frozen=True)
class CycleConfig:
    """Knobs of the cycle protocol.

    `window` is the trailing price count used for estimation, `fit_lag` the
    return lag inside it, and `horizon`/`shift` the forward-return and
    cycle-advance periods (equal: the protocol shifts by the turnover
    time).
    """

    window: int = 1400
    fit_lag: int = 10
    horizon: int = TRADING_HALF_YEAR
    shift: int = TRADING_HALF_YEAR
    risk_kind: RiskKind = RiskKind.ATRE
    target_per_bin: int = 20
    extra_high_bins: int = 2
    risk_cutoff: float = 2.0
    master_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.window <= self.fit_lag:
            raise ValueError("window must exceed fit_lag")
        if self.horizon != self.shift:
            raise ValueError("horizon must equal shift (the turnover period)")
        if self.horizon < 1 or self.target_per_bin < 1:
            raise ValueError("horizon and target_per_bin must be positive")
        if isinstance(self.risk_kind, str):
            object.__setattr__(self, "risk_kind", RiskKind(self.risk_kind))


@dataclass(frozen=True)
class TickerCycleRecord:
    """One equity's outcome in one cycle."""

    ticker: str
    risks: dict  # RiskKind -> float, only usable kinds present
    excess_return: float
    forward_return: float
    bin_index: int | None


@dataclass(frozen=True)
class CycleResult:
    index: int
    start_date: str
    horizon_days: int
    truncated: bool
    market_forward_return: float
    market_fit: AsymmetricDist
    market_sym: QGaussianParams
    n_admitted: int
    records: tuple[TickerCycleRecord, ...]
    exclusions: tuple[tuple[str, str], ...]  # (ticker, reason)
    bin_counts: tuple[int, ...]
    bin_excess: tuple[float, ...]  # nan where the bin is empty


@dataclass(frozen=True)
class RawBacktest:
    config: CycleConfig
    bin_spec: BinSpec
    cycles: tuple[CycleResult, ...]
    n_universe: int


@dataclass(frozen=True)
class Profile:
    """Aggregated risk-return profile with its linear fit."""

    risk_kind: RiskKind
    s: np.ndarray
    e_rel: np.ndarray
    n_cycles_occupied: np.ndarray
    total_members: np.ndarray
    p0: float
    p1: float
    chi2: float


def _ticker_fit_task(args):
    """Fit one equity window; returns (ticker, dist, b_sym) or (ticker, error str)."""
    ticker, values, q_sym = args
    try:
        sample = standardize(values)
        dist = fit_centered(sample.values)
        b_sym = fit_scale_given_shape(sample.values, q_sym)
        return ticker, (dist, b_sym), None
    except QRiskError as err:
        return ticker, None, f"{type(err).__name__}: {err}"


class BacktestEngine:
    """Shared-fit engine behind run_cycles, percentile_track and
    cumulative_earnings.

    Fits are cached per (ticker, window-end position) so overlapping
    operations never refit; per-ticker work may run in worker processes,
    but results always reduce in sorted-ticker order, keeping output bytes
    independent of `jobs`.
    """

    def __init__(self, universe, market: PriceSeries, config: CycleConfig):
        tickers = sorted(s.ticker for s in universe)
        if len(tickers) != len(set(tickers)):
            raise ValueError("duplicate tickers in universe")
        self.universe = {s.ticker: s for s in universe}
        self.tickers = tickers
        self.market = market
        self.config = config
        n = len(market)
        if n <= config.window:
            raise SeriesTooShort(
                f"market has {n} prices; needs more than window={config.window}"
            )
        # ticker position aligned to each market position (-1 when absent)
        self._pos: dict[str, np.ndarray] = {}
        for t in tickers:
            s = self.universe[t]
            idx = np.searchsorted(s.dates, market.dates)
            idx = np.clip(idx, 0, len(s.dates) - 1)
            ok = s.dates[idx] == market.dates
            aligned = np.where(ok, idx, -1)
            self._pos[t] = aligned
        self._panel_cache: dict[int, dict] = {}

    # -- admission and window extraction ------------------------------------

    def _has_window(self, ticker: str, pos: int) -> bool:
        w = self.config.window
        segment = self._pos[ticker][pos - w : pos]
        return len(segment) == w and not np.any(segment < 0)

    def _window_values(self, ticker: str, pos: int) -> np.ndarray:
        w, lag = self.config.window, self.config.fit_lag
        series = self.universe[ticker]
        prices = series.adj_close[self._pos[ticker][pos - w : pos]]
        return (prices[lag:] - prices[:-lag]) / prices[:-lag]

    def _market_window_values(self, pos: int) -> np.ndarray:
        w, lag = self.config.window, self.config.fit_lag
        prices = self.market.adj_close[pos - w : pos]
        return (prices[lag:] - prices[:-lag]) / prices[:-lag]

    def _forward_return(self, ticker: str | None, pos: int, horizon: int) -> float:
        if ticker is None:
            x0 = self.market.adj_close[pos]
            x1 = self.market.adj_close[pos + horizon]
        else:
            p = self._pos[ticker]
            x0 = self.universe[ticker].adj_close[p[pos]]
            x1 = self.universe[ticker].adj_close[p[pos + horizon]]
        return float((x1 - x0) / x0)

    def _admitted(self, pos: int, horizon: int) -> list[str]:
        out = []
        for t in self.tickers:
            p = self._pos[t]
            end = pos + horizon
            if end >= len(p):
                continue
            if p[pos] < 0 or p[end] < 0:
                continue
            if self._has_window(t, pos):
                out.append(t)
        return out

    # -- per-position risk panel ---------------------------------------------

    def position_panel(self, pos: int, horizon: int = 0) -> dict:
        """Market fit plus per-ticker risk panel for the window ending at
        market position `pos`.  Cached."""
        if pos in self._panel_cache:
            return self._panel_cache[pos]
        market_vals = self._market_window_values(pos)
        market_sample = standardize(market_vals)
        market_fit = fit_centered(market_sample.values)
        # the market scale is re-estimated by the same shape-conditional
        # route equities use, so identical data yields an identical pair
        market_shape = fit_symmetric(market_sample.values)
        market_sym = QGaussianParams(
            market_shape.q,
            fit_scale_given_shape(market_sample.values, market_shape.q),
        )
        admitted = [t for t in self.tickers if self._has_window(t, pos)]
        tasks = [(t, self._window_values(t, pos), market_sym.q) for t in admitted]
        if self.config.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.config.jobs) as pool:
                results = list(pool.map(_ticker_fit_task, tasks, chunksize=4))
        else:
            results = [_ticker_fit_task(t) for t in tasks]
        fits: dict[str, tuple[AsymmetricDist, float]] = {}
        errors: dict[str, str] = {}
        for ticker, fit, err in results:
            if err is None:
                fits[ticker] = fit
            else:
                errors[ticker] = err
        risks: dict[str, dict] = {}
        var_m = float(np.var(market_vals, ddof=1))
        for ticker in sorted(fits):
            dist, b_sym = fits[ticker]
            panel: dict[RiskKind, float] = {}
            try:
                total = atre(market_fit, dist)
                panel[RiskKind.ATRE] = total.total
                panel[RiskKind.S_MINUS] = total.s_minus
                panel[RiskKind.S_PLUS] = total.s_plus
            except DomainError:
                # one divergent side makes the total unusable (never
                # substituted); salvage whichever single side converges
                for ref_b, eq_b, kind in (
                    (market_fit.neg, dist.neg, RiskKind.S_MINUS),
                    (market_fit.pos, dist.pos, RiskKind.S_PLUS),
                ):
                    try:
                        panel[kind] = branch_entropy(ref_b, eq_b)
                    except DomainError:
                        pass
            panel[RiskKind.TRE_SYM] = tre_symmetric(market_sym.q, market_sym.b, b_sym)
            if var_m > 0.0:
                ev = self._window_values(ticker, pos)
                cov = float(np.cov(ev, market_vals, ddof=1)[0, 1])
                panel[RiskKind.CAPM_BETA] = cov / var_m
            risks[ticker] = panel
        out = dict(
            market_fit=market_fit,
            market_sym=market_sym,
            risks=risks,
            errors=errors,
        )
        self._panel_cache[pos] = out
        return out

    # -- cycle iteration -------------------------------------------------------

    def cycle_starts(self) -> list[int]:
        """Cycle start positions: every `shift` days from the first position
        with a full estimation window, while at least one forward day
        remains.  The last cycle's horizon may be truncated (flagged)."""
        n = len(self.market)
        return list(range(self.config.window, n - 1, self.config.shift))

    def run_cycles(self) -> RawBacktest:
        cfg = self.config
        starts = self.cycle_starts()
        if not starts:
            raise InsufficientData("no cycle fits inside the market calendar")
        n = len(self.market)
        bin_spec: BinSpec | None = None
        cycles: list[CycleResult] = []
        for k, pos in enumerate(starts):
            horizon = min(cfg.horizon, n - 1 - pos)
            truncated = horizon < cfg.horizon
            panel = self.position_panel(pos)
            market_fwd = self._forward_return(None, pos, horizon)
            admitted = self._admitted(pos, horizon)
            exclusions: list[tuple[str, str]] = []
            records: list[TickerCycleRecord] = []
            cycle_risks: list[float] = []
            for t in admitted:
                if t in panel["errors"]:
                    exclusions.append((t, panel["errors"][t]))
                    continue
                risks = panel["risks"][t]
                fwd = self._forward_return(t, pos, horizon)
                records.append(
                    TickerCycleRecord(t, dict(risks), fwd - market_fwd, fwd, None)
                )
                if cfg.risk_kind in risks:
                    cycle_risks.append(risks[cfg.risk_kind])
            if bin_spec is None:
                bin_spec = build_bins(
                    cycle_risks, cfg.target_per_bin, cfg.extra_high_bins
                )
            counts = [0] * bin_spec.n_bins
            sums = [0.0] * bin_spec.n_bins
            final_records = []
            for rec in records:
                value = rec.risks.get(cfg.risk_kind)
                if value is None:
                    exclusions.append(
                        (rec.ticker, f"risk {cfg.risk_kind.value} unusable")
                    )
                    final_records.append(rec)
                    continue
                idx = bin_spec.assign(value)
                if idx is None:
                    exclusions.append((rec.ticker, "risk outside bin range"))
                    final_records.append(rec)
                    continue
                counts[idx] += 1
                sums[idx] += rec.excess_return
                final_records.append(replace(rec, bin_index=idx))
            bin_excess = tuple(
                sums[i] / counts[i] if counts[i] else float("nan")
                for i in range(bin_spec.n_bins)
            )
            cycles.append(
                CycleResult(
                    index=k,
                    start_date=str(self.market.dates[pos]),
                    horizon_days=horizon,
                    truncated=truncated,
                    market_forward_return=market_fwd,
                    market_fit=panel["market_fit"],
                    market_sym=panel["market_sym"],
                    n_admitted=len(admitted),
                    records=tuple(final_records),
                    exclusions=tuple(sorted(exclusions)),
                    bin_counts=tuple(counts),
                    bin_excess=bin_excess,
                )
            )
        return RawBacktest(cfg, bin_spec, tuple(cycles), len(self.tickers))

    # -- percentile tracking ----------------------------------------------------

    def percentile_track(
        self,
        percentile: float,
        kinds=(RiskKind.ATRE, RiskKind.TRE_SYM, RiskKind.S_MINUS),
        step: int = TRADING_MONTH,
    ) -> dict:
        """Cross-sectional risk percentile at every `step` positions."""
        if not 0.0 < percentile <= 100.0:
            raise ValueError("percentile must lie in (0, 100]")
        kinds = [RiskKind(k) for k in kinds]
        dates: list[str] = []
        series: dict[RiskKind, list[float]] = {k: [] for k in kinds}
        for pos in range(self.config.window, len(self.market), step):
            panel = self.position_panel(pos)
            dates.append(str(self.market.dates[pos]))
            for kind in kinds:
                values = [
                    r[kind] for r in panel["risks"].values() if kind in r
                ]
                series[kind].append(
                    float(np.percentile(values, percentile)) if values else float("nan")
                )
        return dict(
            percentile=percentile,
            dates=dates,
            series={k.value: v for k, v in series.items()},
        )

    # -- cumulative earnings ------------------------------------------------------

    def cumulative_earnings(
        self,
        strategy,
        span_days: int = 2520,
        start_step: int = TRADING_MONTH,
        kinds=(RiskKind.ATRE, RiskKind.S_MINUS, RiskKind.TRE_SYM),
    ) -> dict:
        """Compounded earnings of rebalanced nearest-risk portfolios.

        For every start on the `start_step` grid, rebalance every horizon
        days for `span_days`, each leg holding the `k_stocks` equities whose
        risk is nearest the strategy target (a percentile of the
        cross-section, or a fixed value per kind).  Legs with no usable
        candidates hold the market instead and are counted in
        `fallback_legs`.  Earnings are percent at maturity; the market row
        compounds the same legs.
        """
        cfg = self.config
        if span_days % cfg.horizon != 0:
            raise ValueError("span must be a whole number of turnover periods")
        kinds = [RiskKind(k) for k in kinds]
        n = len(self.market)
        starts = [
            pos
            for pos in range(cfg.window, n, start_step)
            if pos + span_days <= n - 1
        ]
        if not starts:
            raise InsufficientSpan(
                f"no {span_days}-day span fits after a {cfg.window}-day window "
                f"inside {n} market days"
            )
        legs = span_days // cfg.horizon
        maturity_dates = [str(self.market.dates[pos + span_days]) for pos in starts]
        portfolio: dict[RiskKind, list[float]] = {k: [] for k in kinds}
        fallback: dict[RiskKind, int] = {k: 0 for k in kinds}
        market_earn: list[float] = []
        for pos in starts:
            growth = {k: 1.0 for k in kinds}
            market_growth = 1.0
            for leg in range(legs):
                at = pos + leg * cfg.horizon
                panel = self.position_panel(at)
                market_leg = self._forward_return(None, at, cfg.horizon)
                market_growth *= 1.0 + market_leg
                eligible = [
                    t
                    for t in sorted(panel["risks"])
                    if self._pos[t][at] >= 0
                    and at + cfg.horizon < len(self._pos[t])
                    and self._pos[t][at + cfg.horizon] >= 0
                ]
                for kind in kinds:
                    pairs = [
                        (t, panel["risks"][t][kind])
                        for t in eligible
                        if kind in panel["risks"][t]
                    ]
                    if not pairs:
                        fallback[kind] += 1
                        growth[kind] *= 1.0 + market_leg
                        continue
                    target = strategy.target(kind, [v for _, v in pairs])
                    k_stocks = strategy.k_stocks
                    chosen = sorted(pairs, key=lambda tv: (abs(tv[1] - target), tv[0]))
                    chosen = chosen[:k_stocks]
                    leg_return = float(
                        np.mean(
                            [self._forward_return(t, at, cfg.horizon) for t, _ in chosen]
                        )
                    )
                    growth[kind] *= 1.0 + leg_return
            for kind in kinds:
                portfolio[kind].append(100.0 * (growth[kind] - 1.0))
            market_earn.append(100.0 * (market_growth - 1.0))

        def stats(xs):
            arr = np.asarray(xs, dtype=float)
            return dict(
                mean_pct=float(np.mean(arr)),
                median_pct=float(np.median(arr)),
                std_pct=float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0,
            )

        return dict(
            strategy=strategy.describe(),
            span_days=span_days,
            start_step=start_step,
            maturity_dates=maturity_dates,
            portfolio_pct={k.value: portfolio[k] for k in kinds},
            market_pct=market_earn,
            fallback_legs={k.value: fallback[k] for k in kinds},
            stats={k.value: stats(portfolio[k]) for k in kinds},
            market_stats=stats(market_earn),
        )


@dataclass(frozen=True)
class PercentileStrategy:
    """Hold the k stocks nearest a cross-sectional risk percentile."""

    percentile: float = 90.0
    k_stocks: int = 15

    def target(self, kind: RiskKind, values) -> float:
        return float(np.percentile(values, self.percentile))

    def describe(self) -> dict:
        return dict(type="percentile", percentile=self.percentile, k_stocks=self.k_stocks)


@dataclass(frozen=True)
class FixedRiskStrategy:
    """Hold the k stocks nearest a fixed risk value per measure kind."""

    targets: dict
    k_stocks: int = 15

    def target(self, kind: RiskKind, values) -> float:
        return float(self.targets[RiskKind(kind)])

    def describe(self) -> dict:
        return dict(
            type="fixed_risk",
            targets={RiskKind(k).value: float(v) for k, v in self.targets.items()},
            k_stocks=self.k_stocks,
        )


# -- module-level convenience wrappers -------------------------------------------


def run_cycles(universe, market: PriceSeries, config: CycleConfig) -> RawBacktest:
    """Run the full cycle protocol; see :class:`BacktestEngine`."""
    return BacktestEngine(universe, market, config).run_cycles()


def aggregate_profile(raw: RawBacktest, risk_cutoff: float | None = None) -> Profile:
    """Per-bin mean excess returns over cycles, on the configured risk kind."""
    cutoff = raw.config.risk_cutoff if risk_cutoff is None else risk_cutoff
    return _profile_from_assignments(
        raw.config.risk_kind,
        raw.bin_spec,
        [c.bin_counts for c in raw.cycles],
        [c.bin_excess for c in raw.cycles],
        cutoff,
    )


def _profile_from_assignments(kind, bin_spec, counts_by_cycle, excess_by_cycle, cutoff):
    centers = bin_spec.centers
    counts = np.asarray(counts_by_cycle, dtype=int)
    excess = np.asarray(excess_by_cycle, dtype=float)
    s_list, e_list, occ_list, tot_list = [], [], [], []
    for i, center in enumerate(centers):
        if center > cutoff:
            continue
        occupied = counts[:, i] > 0
        if not np.any(occupied):
            continue
        s_list.append(float(center))
        e_list.append(float(np.mean(excess[occupied, i])))
        occ_list.append(int(np.count_nonzero(occupied)))
        tot_list.append(int(np.sum(counts[:, i])))
    if not s_list:
        raise AllBinsEmpty("no occupied bin lies below the risk cutoff")
    p0, p1, chi2 = linear_fit_chi2(s_list, e_list)
    return Profile(
        risk_kind=RiskKind(kind),
        s=np.array(s_list),
        e_rel=np.array(e_list),
        n_cycles_occupied=np.array(occ_list),
        total_members=np.array(tot_list),
        p0=p0,
        p1=p1,
        chi2=chi2,
    )


def profile_for_kind(
    raw: RawBacktest,
    kind: RiskKind,
    target_per_bin: int | None = None,
    risk_cutoff: float | None = None,
) -> Profile:
    """Re-bin the stored per-ticker risk panels on a different measure.

    Bins are rebuilt from the first cycle's risks of `kind` (same recipe as
    the main run) without refitting anything.
    """
    kind = RiskKind(kind)
    cfg = raw.config
    target = cfg.target_per_bin if target_per_bin is None else target_per_bin
    cutoff = cfg.risk_cutoff if risk_cutoff is None else risk_cutoff
    first = [r.risks[kind] for r in raw.cycles[0].records if kind in r.risks]
    spec = build_bins(first, target, cfg.extra_high_bins)
    counts_by_cycle, excess_by_cycle = [], []
    for cyc in raw.cycles:
        counts = [0] * spec.n_bins
        sums = [0.0] * spec.n_bins
        for rec in cyc.records:
            if kind not in rec.risks:
                continue
            idx = spec.assign(rec.risks[kind])
            if idx is None:
                continue
            counts[idx] += 1
            sums[idx] += rec.excess_return
        counts_by_cycle.append(counts)
        excess_by_cycle.append(
            [sums[i] / counts[i] if counts[i] else float("nan") for i in range(spec.n_bins)]
        )
    return _profile_from_assignments(kind, spec, counts_by_cycle, excess_by_cycle, cutoff)


def percentile_track(
    universe,
    market: PriceSeries,
    config: CycleConfig,
    percentile: float = 90.0,
    kinds=(RiskKind.ATRE, RiskKind.TRE_SYM, RiskKind.S_MINUS),
    step: int = TRADING_MONTH,
) -> dict:
    """Monthly cross-sectional risk percentile; see :class:`BacktestEngine`."""
    return BacktestEngine(universe, market, config).percentile_track(
        percentile, kinds=kinds, step=step
    )


def cumulative_earnings(
    universe,
    market: PriceSeries,
    config: CycleConfig,
    strategy,
    span_days: int = 2520,
    start_step: int = TRADING_MONTH,
) -> dict:
    """Rebalanced nearest-risk portfolio earnings; see :class:`BacktestEngine`."""
    return BacktestEngine(universe, market, config).cumulative_earnings(
        strategy, span_days=span_days, start_step=start_step
    )
