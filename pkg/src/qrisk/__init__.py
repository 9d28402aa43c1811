"""qrisk: asymmetric heavy-tail relative-entropy risk measures and the
six-month-cycle portfolio backtest built on them."""

__version__ = "0.1.0"

from .backtest import (
    BacktestEngine,
    BinSpec,
    CycleConfig,
    FixedRiskStrategy,
    PercentileStrategy,
    PriceSeries,
    Profile,
    RawBacktest,
    ReturnSeries,
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
from .distributions import AsymmetricDist, FitDiagnostics, QGaussianParams, normalization
from .entropy import (
    AtreResult,
    BranchEntropyInputs,
    RiskKind,
    RiskScore,
    atre,
    branch_entropy,
    kl_discrete,
    quadrature_oracle,
    tre_discrete,
    tre_symmetric,
    tsallis_entropy_discrete,
)
from .errors import QRiskError
from .estimation import (
    KSResult,
    StandardizedSample,
    fit_asymmetric,
    fit_branch,
    fit_centered,
    fit_symmetric,
    ks_statistic,
    ks_test,
    standardize,
)
from .seeds import derive_seed
from .simulate import TickerSpec, UniverseSpec, generate_universe, write_universe
from .specfun import c_q, log_beta, log_gamma, q_exp, q_log
