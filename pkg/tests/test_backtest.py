"""Cycle protocol: ingestion, returns, beta, bins, regression, engine."""

import io

import numpy as np
import pytest

from qrisk.backtest import (
    BacktestEngine,
    BinSpec,
    CycleConfig,
    FixedRiskStrategy,
    PercentileStrategy,
    PriceSeries,
    aggregate_profile,
    build_bins,
    capm_alpha_beta,
    capm_beta,
    compute_returns,
    cumulative_earnings,
    linear_fit_chi2,
    load_prices,
    percentile_track,
    profile_for_kind,
    run_cycles,
)
from qrisk.entropy import RiskKind
from qrisk.errors import (
    AllBinsEmpty,
    DegenerateRisks,
    DegenerateX,
    DegenerateY,
    EmptySeries,
    InsufficientData,
    InsufficientOverlap,
    NonMonotoneDates,
    ParseError,
    SeriesTooShort,
)
from qrisk.simulate import TickerSpec, UniverseSpec, generate_universe

from conftest import price_series_from_log_shocks, small_universe_spec


# -- load_prices -------------------------------------------------------------


def test_load_prices_valid_two_rows():
    csv = io.StringIO("date,adj_close\n2020-01-02,100.0\n2020-01-03,101.5\n")
    series = load_prices(csv, ticker="X")
    assert len(series) == 2
    assert series.ticker == "X"
    assert series.adj_close[1] == 101.5


def test_load_prices_out_of_order_dates():
    csv = io.StringIO("date,adj_close\n2020-01-03,100.0\n2020-01-02,101.5\n")
    with pytest.raises(NonMonotoneDates):
        load_prices(csv, ticker="X")


def test_load_prices_rejects_nonpositive_price_with_row():
    csv = io.StringIO("date,adj_close\n2020-01-02,100.0\n2020-01-03,0.00\n")
    with pytest.raises(ParseError) as err:
        load_prices(csv, ticker="X")
    assert err.value.row == 3


def test_load_prices_rejects_bad_header_and_empty():
    with pytest.raises(ParseError):
        load_prices(io.StringIO("foo,bar\n1,2\n"), ticker="X")
    with pytest.raises(EmptySeries):
        load_prices(io.StringIO("date,adj_close\n"), ticker="X")
    with pytest.raises(ParseError):
        load_prices(io.StringIO("date,adj_close\n2020-01-02,abc\n"), ticker="X")


def test_load_prices_gap_flag():
    csv = io.StringIO("date,adj_close\n2020-01-02,100.0\n2020-01-03,101.0\n2020-01-06,102.0\n")
    assert not load_prices(csv, ticker="X").has_gaps
    csv = io.StringIO("date,adj_close\n2020-01-02,100.0\n2020-01-08,102.0\n")
    assert load_prices(csv, ticker="X").has_gaps


# -- compute_returns -----------------------------------------------------------


def make_series(prices, start="2020-01-02"):
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    dates = np.busday_offset(first, np.arange(len(prices)), roll="forward")
    return PriceSeries("X", dates, np.asarray(prices, dtype=float))


def test_compute_returns_direct():
    r = compute_returns(make_series([100.0, 110.0]), 1)
    assert r.returns == pytest.approx([0.10])
    assert len(r.dates) == 1


def test_compute_returns_constant_prices():
    r = compute_returns(make_series([50.0] * 10), 3)
    assert np.all(r.returns == 0.0)
    assert len(r.returns) == 7


def test_compute_returns_lag_two_hand_case():
    r = compute_returns(make_series([100.0, 105.0, 99.0]), 2)
    assert r.returns == pytest.approx([-0.01])


def test_compute_returns_too_short():
    with pytest.raises(SeriesTooShort):
        compute_returns(make_series([1.0, 2.0]), 5)


def test_return_series_length_invariant():
    series = make_series(np.linspace(100, 120, 57))
    r = compute_returns(series, 10)
    assert len(r.returns) == len(series) - 10


# -- capm beta -------------------------------------------------------------------


def test_capm_beta_identity_and_scaling():
    rng = np.random.default_rng(0)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, 200)))
    market = compute_returns(make_series(prices), 1)
    assert capm_beta(market, market) == pytest.approx(1.0, rel=1e-12)
    doubled = market.__class__("Y", market.dates, 2.0 * market.returns, 1)
    assert capm_beta(doubled, market) == pytest.approx(2.0, rel=1e-12)
    alpha, beta = capm_alpha_beta(doubled, market)
    assert alpha == pytest.approx(np.mean(doubled.returns) - 2.0 * np.mean(market.returns))


def test_capm_beta_uncorrelated_noise():
    rng = np.random.default_rng(1)
    n = 400
    first = np.busday_offset(np.datetime64("2020-01-02", "D"), 0, roll="forward")
    dates = np.busday_offset(first, np.arange(n), roll="forward")
    from qrisk.backtest import ReturnSeries

    market = ReturnSeries("M", dates, rng.normal(0, 0.01, n), 1)
    noise = ReturnSeries("N", dates, rng.normal(0, 0.01, n), 1)
    beta = capm_beta(noise, market)
    assert abs(beta) <= 3.0 / np.sqrt(n)


def test_capm_beta_insufficient_overlap():
    a = compute_returns(make_series(np.linspace(100, 110, 20)), 1)
    with pytest.raises(InsufficientOverlap):
        capm_beta(a, a)


# -- bins ---------------------------------------------------------------------------


def test_build_bins_uniform_quantiles():
    rng = np.random.default_rng(2)
    risks = rng.uniform(0.0, 1.0, 100)
    spec = build_bins(risks, target_per_bin=10)
    assert spec.n_bins == 10 + 2
    counts = np.zeros(spec.n_bins, dtype=int)
    for r in risks:
        counts[spec.assign(r)] += 1
    assert np.all(counts[:10] >= 9) and np.all(counts[:10] <= 11)
    assert counts[10] == counts[11] == 0  # spare high bins empty in cycle 1
    assert np.all(np.diff(spec.edges) > 0)


def test_build_bins_errors():
    with pytest.raises(DegenerateRisks):
        build_bins(np.ones(100), target_per_bin=10)
    with pytest.raises(InsufficientData):
        build_bins(np.linspace(0, 1, 10), target_per_bin=10)


def test_bin_assignment_edges():
    spec = BinSpec(np.array([0.0, 1.0, 2.0, 3.0]))
    assert spec.assign(-0.1) is None
    assert spec.assign(0.0) == 0
    assert spec.assign(0.999) == 0
    assert spec.assign(1.0) == 1
    assert spec.assign(3.0) == 2  # top edge closes the last bin
    assert spec.assign(3.1) is None


# -- linear fit ------------------------------------------------------------------------


def test_linear_fit_exact_line():
    s = np.array([0.0, 1.0, 2.0, 3.0])
    p0, p1, chi2 = linear_fit_chi2(s, 2.0 * s + 1.0)
    assert (p0, p1, chi2) == pytest.approx((1.0, 2.0, 1.0), abs=1e-12)


def test_linear_fit_documented_three_point_case():
    # hand least squares: slope 1/2, intercept 1/6, quality 0.75
    p0, p1, chi2 = linear_fit_chi2([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])
    assert p1 == pytest.approx(0.5, rel=1e-12)
    assert p0 == pytest.approx(1.0 / 6.0, rel=1e-12)
    assert chi2 == pytest.approx(0.75, rel=1e-12)


def test_linear_fit_errors():
    with pytest.raises(DegenerateY):
        linear_fit_chi2([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    with pytest.raises(DegenerateX):
        linear_fit_chi2([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(InsufficientData):
        linear_fit_chi2([0.0, 1.0], [0.0, 1.0])


def test_linear_fit_chi2_never_exceeds_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = rng.normal(size=8)
        e = rng.normal(size=8)
        if np.ptp(s) == 0 or np.ptp(e) == 0:
            continue
        _, _, chi2 = linear_fit_chi2(s, e)
        assert chi2 <= 1.0


# -- engine ------------------------------------------------------------------------------


def test_cycle_count_matches_published_span():
    # 6688 trading days, 1400-day window, 126-day shifts: 42 cycles
    starts = list(range(1400, 6688 - 1, 126))
    assert len(starts) == 42


def test_run_cycles_clone_neutrality(small_raw):
    for cyc in small_raw.cycles:
        clone = [r for r in cyc.records if r.ticker == "CLONE"]
        assert len(clone) == 1
        rec = clone[0]
        assert rec.excess_return == 0.0
        for kind in (RiskKind.ATRE, RiskKind.S_MINUS, RiskKind.S_PLUS, RiskKind.TRE_SYM):
            assert abs(rec.risks[kind]) <= 1e-12
        assert rec.risks[RiskKind.CAPM_BETA] == pytest.approx(1.0, rel=1e-9)


def test_run_cycles_conservation(small_raw):
    for cyc in small_raw.cycles:
        assert sum(cyc.bin_counts) + len(cyc.exclusions) == cyc.n_admitted


def test_run_cycles_deterministic(small_universe, small_config):
    market, constituents = small_universe
    again = run_cycles(constituents, market, small_config)
    first = run_cycles(constituents, market, small_config)
    # NaN-tolerant bitwise comparison: identical reprs mean identical floats
    assert repr(first.cycles) == repr(again.cycles)
    assert np.array_equal(first.bin_spec.edges, again.bin_spec.edges)


def test_run_cycles_scale_invariance(small_universe, small_config):
    # multiplying one ticker's prices by a constant changes nothing
    market, constituents = small_universe
    base = run_cycles(constituents, market, small_config)
    scaled = [
        PriceSeries(s.ticker, s.dates, s.adj_close * (250.0 if s.ticker == "T03" else 1.0))
        for s in constituents
    ]
    other = run_cycles(scaled, market, small_config)
    for c1, c2 in zip(base.cycles, other.cycles):
        r1 = [r for r in c1.records if r.ticker == "T03"][0]
        r2 = [r for r in c2.records if r.ticker == "T03"][0]
        assert r1.excess_return == pytest.approx(r2.excess_return, rel=1e-12, abs=1e-15)
        # rescaling perturbs returns in the last ulp; the optimizer then
        # wanders within its own tolerance, so risks match to ~1e-5
        for kind, v in r1.risks.items():
            assert v == pytest.approx(r2.risks[kind], rel=2e-5, abs=1e-8)


def test_run_cycles_bin_edges_frozen(small_raw):
    spec = small_raw.bin_spec
    assert spec.n_bins >= 5
    counts0 = np.array(small_raw.cycles[0].bin_counts)
    interior = counts0[: spec.n_bins - spec.extra_high_bins]
    assert np.all(counts0[-spec.extra_high_bins:] == 0)
    target = small_raw.config.target_per_bin
    assert np.all(interior >= target - 1) and np.all(interior <= target + 1)


def test_market_clone_universe_zero_profile(small_config):
    spec = UniverseSpec(
        start="2012-01-03",
        days=500,
        market=TickerSpec(ticker="MKT", vol=0.01, drift=0.0003),
        tickers=tuple(TickerSpec(ticker=f"C{i}", clone_of="MKT") for i in range(9)),
    )
    market, clones = generate_universe(spec, master_seed=5)
    cfg = CycleConfig(
        window=300, fit_lag=10, horizon=42, shift=42,
        risk_kind=RiskKind.ATRE, target_per_bin=3, risk_cutoff=10.0,
    )
    with pytest.raises(DegenerateRisks):
        run_cycles(clones, market, cfg)  # all risks identical: bins degenerate


def test_truncated_final_cycle_flagged():
    spec = small_universe_spec(n_tickers=9, days=660)
    market, constituents = generate_universe(spec, master_seed=3)
    cfg = CycleConfig(window=300, fit_lag=10, horizon=42, shift=42,
                      risk_kind=RiskKind.ATRE, target_per_bin=3, risk_cutoff=10.0)
    raw = run_cycles(constituents, market, cfg)
    # starts at 300, 342, ..., 636; the last cycle has only 23 forward days
    assert len(raw.cycles) == 9
    assert raw.cycles[-1].truncated
    assert raw.cycles[-1].horizon_days == 660 - 1 - (300 + 42 * 8)
    assert all(not c.truncated for c in raw.cycles[:-1])


# -- aggregation ---------------------------------------------------------------------------


def test_aggregate_profile_single_cycle_passthrough(small_universe, small_config):
    market, constituents = small_universe
    raw = run_cycles(constituents, market, small_config)
    one_cycle = raw.__class__(raw.config, raw.bin_spec, raw.cycles[:1], raw.n_universe)
    profile = aggregate_profile(one_cycle)
    occupied = [i for i, c in enumerate(raw.cycles[0].bin_counts)
                if c > 0 and raw.bin_spec.centers[i] <= raw.config.risk_cutoff]
    expect = [raw.cycles[0].bin_excess[i] for i in occupied]
    assert profile.e_rel == pytest.approx(expect)


def test_aggregate_profile_mean_over_cycles():
    # two synthetic cycles with known per-bin values average to their mean
    from qrisk.backtest import _profile_from_assignments

    spec = BinSpec(np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
    counts = [[3, 2, 1, 0], [3, 0, 1, 0]]
    excess = [[0.02, 0.05, 0.10, np.nan], [0.04, np.nan, 0.20, np.nan]]
    prof = _profile_from_assignments(RiskKind.ATRE, spec, counts, excess, cutoff=10.0)
    assert prof.s == pytest.approx([0.5, 1.5, 2.5])
    assert prof.e_rel == pytest.approx([0.03, 0.05, 0.15])


def test_aggregate_profile_cutoff_errors(small_raw):
    with pytest.raises(AllBinsEmpty):
        aggregate_profile(small_raw, risk_cutoff=-1.0)


def test_profile_for_kind_rebins(small_raw):
    prof = profile_for_kind(small_raw, RiskKind.S_MINUS)
    assert prof.risk_kind is RiskKind.S_MINUS
    assert len(prof.s) >= 3
    assert prof.chi2 <= 1.0


def test_profile_on_beta_baseline(small_raw):
    # the CAPM baseline bins like any other measure (values may be negative)
    prof = profile_for_kind(small_raw, RiskKind.CAPM_BETA, risk_cutoff=100.0)
    assert prof.risk_kind is RiskKind.CAPM_BETA
    assert len(prof.s) >= 3
    assert prof.chi2 <= 1.0


# -- percentile track ---------------------------------------------------------------------


def test_percentile_track_full_percentile_is_max(small_universe, small_config):
    market, constituents = small_universe
    engine = BacktestEngine(constituents, market, small_config)
    track100 = engine.percentile_track(100.0, kinds=(RiskKind.ATRE,), step=100)
    track50 = engine.percentile_track(50.0, kinds=(RiskKind.ATRE,), step=100)
    for hi, med in zip(track100["series"]["atre"], track50["series"]["atre"]):
        assert hi >= med
    panel = engine.position_panel(small_config.window)
    values = [r[RiskKind.ATRE] for r in panel["risks"].values() if RiskKind.ATRE in r]
    assert track100["series"]["atre"][0] == pytest.approx(max(values))


def test_percentile_track_clone_universe_constant():
    spec = UniverseSpec(
        start="2012-01-03",
        days=450,
        market=TickerSpec(ticker="MKT", vol=0.01),
        tickers=tuple(TickerSpec(ticker=f"C{i}", clone_of="MKT") for i in range(4)),
    )
    market, clones = generate_universe(spec, master_seed=8)
    cfg = CycleConfig(window=300, fit_lag=10, horizon=42, shift=42, target_per_bin=1)
    track = percentile_track(clones, market, cfg, percentile=90.0,
                             kinds=(RiskKind.ATRE, RiskKind.S_MINUS), step=63)
    assert all(v == 0.0 for v in track["series"]["atre"])
    assert all(v == 0.0 for v in track["series"]["s_minus"])


def test_percentile_track_regime_shift_rises():
    # negative-branch tails get heavier mid-sample; the S- percentile follows
    from qrisk.distributions import AsymmetricDist, QGaussianParams

    calm = AsymmetricDist(QGaussianParams(1.15, 1.0), QGaussianParams(1.2, 1.0))
    wild = AsymmetricDist(QGaussianParams(2.1, 1.0), QGaussianParams(1.2, 1.0))
    days = 720
    half = days // 2
    series = []
    for i in range(4):
        shocks = 0.012 * np.concatenate([
            calm.sample(half, seed=1000 + i),
            wild.sample(days - 1 - half, seed=2000 + i),
        ])
        series.append(price_series_from_log_shocks(f"R{i}", "2011-01-03", shocks))
    market_shocks = 0.012 * calm.sample(days - 1, seed=999)
    market = price_series_from_log_shocks("MKT", "2011-01-03", market_shocks)
    cfg = CycleConfig(window=300, fit_lag=10, horizon=42, shift=42, target_per_bin=1)
    track = percentile_track(series, market, cfg, percentile=90.0,
                             kinds=(RiskKind.S_MINUS,), step=42)
    vals = track["series"]["s_minus"]
    assert vals[-1] > vals[0] + 0.05


# -- cumulative earnings -----------------------------------------------------------------


def test_cumulative_earnings_clone_universe_matches_market():
    spec = UniverseSpec(
        start="2012-01-03",
        days=560,
        market=TickerSpec(ticker="MKT", vol=0.01, drift=0.0004),
        tickers=tuple(TickerSpec(ticker=f"C{i}", clone_of="MKT") for i in range(5)),
    )
    market, clones = generate_universe(spec, master_seed=9)
    cfg = CycleConfig(window=300, fit_lag=10, horizon=42, shift=42, target_per_bin=1)
    out = cumulative_earnings(clones, market, cfg, PercentileStrategy(90.0, k_stocks=3),
                              span_days=126, start_step=63)
    for kind in ("atre", "s_minus", "tre_sym"):
        assert out["portfolio_pct"][kind] == pytest.approx(out["market_pct"], rel=1e-12)
    stats = out["stats"]["atre"]
    assert stats["mean_pct"] == pytest.approx(out["market_stats"]["mean_pct"], rel=1e-12)


def test_cumulative_earnings_fixed_risk_strategy(small_universe, small_config):
    market, constituents = small_universe
    strat = FixedRiskStrategy(
        targets={RiskKind.ATRE: 0.5, RiskKind.S_MINUS: 0.2, RiskKind.TRE_SYM: 0.3},
        k_stocks=3,
    )
    out = cumulative_earnings(constituents, market, small_config, strat,
                              span_days=84, start_step=84)
    assert out["strategy"]["type"] == "fixed_risk"
    assert len(out["maturity_dates"]) == len(out["market_pct"])
    for kind in ("atre", "s_minus", "tre_sym"):
        assert len(out["portfolio_pct"][kind]) == len(out["market_pct"])


def test_cumulative_earnings_insufficient_span(small_universe, small_config):
    from qrisk.errors import InsufficientSpan

    market, constituents = small_universe
    with pytest.raises(InsufficientSpan):
        cumulative_earnings(constituents, market, small_config,
                            PercentileStrategy(), span_days=4200, start_step=21)
