"""Command-line interface.

Subcommands: ``fit`` (estimate one ticker's model), ``risk`` (score a fit
pair), ``backtest`` (the full cycle protocol, emitting the report bundle),
``simulate`` (write a synthetic universe).  Exit codes: 0 success, 1 I/O or
parse failure, 2 fit failure, 3 domain error, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .backtest import (
    BacktestEngine,
    CycleConfig,
    FixedRiskStrategy,
    PercentileStrategy,
    aggregate_profile,
    load_prices,
)
from .distributions import AsymmetricDist, QGaussianParams
from .entropy import RiskKind, atre, branch_entropy, tre_symmetric
from .errors import (
    DegenerateSeries,
    DomainError,
    FitDidNotConverge,
    InsufficientData,
    NonConvergent,
    QRiskError,
    SeriesTooShort,
    SupportMismatch,
)
from .estimation import fit_asymmetric, fit_symmetric, ks_test, standardize
from .report import (
    SCHEMA_VERSION,
    build_report,
    run_manifest,
    sha256_file,
    write_report_bundle,
)
from .simulate import UniverseSpec, write_universe

EXIT_OK = 0
EXIT_IO = 1
EXIT_FIT = 2
EXIT_DOMAIN = 3
EXIT_USAGE = 64

RISK_KIND_FLAGS = {
    "atre": RiskKind.ATRE,
    "s-minus": RiskKind.S_MINUS,
    "s-plus": RiskKind.S_PLUS,
    "tre": RiskKind.TRE_SYM,
    "beta": RiskKind.CAPM_BETA,
}

FIT_ERRORS = (InsufficientData, DegenerateSeries, FitDidNotConverge)
DOMAIN_ERRORS = (DomainError, SupportMismatch, NonConvergent)


class _Parser(argparse.ArgumentParser):
    """argparse clone whose usage failures exit 64 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qrisk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qrisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_fit = sub.add_parser("fit", help="fit one ticker's asymmetric model")
    p_fit.add_argument("prices_csv")
    p_fit.add_argument("--lag", type=int, default=10, help="return lag in trading days")
    p_fit.add_argument("--window", type=int, default=1400,
                       help="trailing price count used for estimation")
    p_fit.add_argument("--out", default="-", help="fit JSON path ('-' for stdout)")
    p_fit.add_argument("--sample-out", default=None,
                       help="optional CSV of the standardized sample")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--bootstrap", type=int, default=50,
                       help="bootstrap resamples for standard errors")
    p_fit.add_argument("--ks-replicates", type=int, default=0,
                       help="parametric-bootstrap KS replicates (0 skips the test)")

    p_risk = sub.add_parser("risk", help="score an equity fit against a market fit")
    p_risk.add_argument("market_fit")
    p_risk.add_argument("equity_fit")
    p_risk.add_argument("--kind", "--risk-kind", dest="kind",
                        choices=sorted(RISK_KIND_FLAGS), default="atre")

    p_bt = sub.add_parser("backtest", help="run the cycle protocol")
    p_bt.add_argument("--manifest", required=True, help="universe manifest JSON")
    p_bt.add_argument("--config", required=True, help="cycle config JSON")
    p_bt.add_argument("--out", required=True, help="output directory")
    p_bt.add_argument("--seed", type=int, default=None, help="override master seed")
    p_bt.add_argument("--risk-kind", choices=sorted(RISK_KIND_FLAGS), default=None,
                      help="override the configured binning measure")
    p_bt.add_argument("--jobs", type=int, default=None,
                      help="fit worker processes (overrides the config)")

    p_sim = sub.add_parser("simulate", help="write a synthetic universe")
    p_sim.add_argument("--spec", required=True, help="universe spec JSON")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=0)
    return parser


def _emit_json(payload: dict, out: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _cmd_fit(args) -> int:
    series = load_prices(args.prices_csv)
    if args.window > len(series):
        raise SeriesTooShort(
            f"window {args.window} exceeds series length {len(series)}"
        )
    trimmed = series.adj_close[-args.window:]
    returns = (trimmed[args.lag:] - trimmed[:-args.lag]) / trimmed[:-args.lag]
    sample = standardize(returns)
    dist, diag = fit_asymmetric(returns, n_bootstrap=args.bootstrap, seed=args.seed)
    sym = fit_symmetric(sample.values)
    ks = None
    if args.ks_replicates > 0:
        res = ks_test(sample, dist, n_synthetic=args.ks_replicates, seed=args.seed)
        ks = dict(d_max=res.d_max, d_crit=res.d_crit, passed=res.passed,
                  n_synthetic=args.ks_replicates)
    lo, hi = float(np.min(sample.values)), float(np.max(sample.values))
    omega = np.linspace(lo, hi, 201)
    payload = dict(
        schema_version=SCHEMA_VERSION,
        ticker=series.ticker,
        lag_days=args.lag,
        window=args.window,
        params=dict(
            q_minus=dist.neg.q, b_minus=dist.neg.b,
            q_plus=dist.pos.q, b_plus=dist.pos.b,
            q_sym=sym.q, b_sym=sym.b,
        ),
        param_se=dict(
            q_minus=diag.param_se[0], b_minus=diag.param_se[1],
            q_plus=diag.param_se[2], b_plus=diag.param_se[3],
        ),
        n_neg=diag.n_neg,
        n_pos=diag.n_pos,
        imbalanced=diag.imbalanced,
        standardization=dict(raw_mean=sample.raw_mean, raw_std=sample.raw_std),
        ks=ks,
        density_curve=dict(omega=list(omega), pdf=list(dist.pdf(omega))),
        input=dict(path=os.path.basename(args.prices_csv),
                   sha256=sha256_file(args.prices_csv)),
    )
    _emit_json(payload, args.out)
    if args.sample_out:
        with open(args.sample_out, "w", newline="") as fh:
            fh.write("value\n")
            for v in sample.values:
                fh.write(f"{float(v)!r}\n")
    return EXIT_OK


def _params_from_fit(doc: dict) -> dict:
    p = doc["params"]
    return dict(
        neg=QGaussianParams(p["q_minus"], p["b_minus"]),
        pos=QGaussianParams(p["q_plus"], p["b_plus"]),
        sym=(p["q_sym"], p["b_sym"]),
    )


def _cmd_risk(args, parser: _Parser) -> int:
    kind = RISK_KIND_FLAGS[args.kind]
    if kind is RiskKind.CAPM_BETA:
        parser.error("beta needs aligned return series, not fit files; "
                     "use the backtest command")
    with open(args.market_fit) as fh:
        market = json.load(fh)
    with open(args.equity_fit) as fh:
        equity = json.load(fh)
    m, e = _params_from_fit(market), _params_from_fit(equity)
    components = None
    if kind is RiskKind.ATRE:
        res = atre(AsymmetricDist(m["neg"], m["pos"]), AsymmetricDist(e["neg"], e["pos"]))
        value = res.total
        components = dict(s_minus=res.s_minus, s_plus=res.s_plus)
    elif kind is RiskKind.S_MINUS:
        value = branch_entropy(m["neg"], e["neg"])
    elif kind is RiskKind.S_PLUS:
        value = branch_entropy(m["pos"], e["pos"])
    else:  # symmetric: market shape is authoritative for the pair
        value = tre_symmetric(m["sym"][0], m["sym"][1], e["sym"][1])
    record = dict(
        schema_version=SCHEMA_VERSION,
        kind=kind.value,
        value=value,
        components=components,
        inputs=dict(
            market_sha256=sha256_file(args.market_fit),
            equity_sha256=sha256_file(args.equity_fit),
        ),
    )
    sys.stdout.write(f"{value!r}\n")
    sys.stdout.write(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _load_config(path, seed_override, kind_override, jobs) -> tuple[CycleConfig, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    extras = {k: doc.pop(k) for k in ("percentile", "cumulative") if k in doc}
    if seed_override is not None:
        doc["master_seed"] = seed_override
    if kind_override is not None:
        doc["risk_kind"] = RISK_KIND_FLAGS[kind_override].value
    if jobs is not None:
        doc["jobs"] = jobs
    try:
        config = CycleConfig(**doc)
    except TypeError as err:
        raise QRiskError(f"bad config: {err}") from err
    return config, extras


def _cmd_backtest(args) -> int:
    manifest_dir = os.path.dirname(os.path.abspath(args.manifest))
    with open(args.manifest) as fh:
        manifest_doc = json.load(fh)
    config, extras = _load_config(args.config, args.seed, args.risk_kind, args.jobs)

    def resolve(rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(manifest_dir, rel)

    market_path = resolve(manifest_doc["market"]["path"])
    if not os.path.exists(market_path):
        raise FileNotFoundError(f"market prices not found: {market_path}")
    market = load_prices(market_path, ticker=manifest_doc["market"].get("ticker"))
    universe = []
    input_paths = [market_path]
    for entry in manifest_doc.get("tickers", []):
        if not entry.get("constituent", True):
            continue
        path = resolve(entry["path"])
        if not os.path.exists(path):
            raise FileNotFoundError(f"ticker prices not found: {path}")
        universe.append(load_prices(path, ticker=entry.get("ticker")))
        input_paths.append(path)

    engine = BacktestEngine(universe, market, config)
    raw = engine.run_cycles()
    profile = aggregate_profile(raw)
    pct_opts = extras.get("percentile") or {}
    track = engine.percentile_track(
        percentile=float(pct_opts.get("percentile", 90.0)),
        step=int(pct_opts.get("step", 21)),
    )
    cumulative = None
    cum_opts = extras.get("cumulative")
    if cum_opts:
        strat_doc = cum_opts.get("strategy", {})
        if strat_doc.get("type") == "fixed_risk":
            strategy = FixedRiskStrategy(
                targets={RiskKind(k): float(v) for k, v in strat_doc["targets"].items()},
                k_stocks=int(strat_doc.get("k_stocks", 15)),
            )
        else:
            strategy = PercentileStrategy(
                percentile=float(strat_doc.get("percentile", 90.0)),
                k_stocks=int(strat_doc.get("k_stocks", 15)),
            )
        cumulative = engine.cumulative_earnings(
            strategy,
            span_days=int(cum_opts.get("span_days", 2520)),
            start_step=int(cum_opts.get("start_step", 21)),
        )
    manifest = run_manifest(
        args.config, input_paths + [args.manifest, args.config], config.master_seed
    )
    report = build_report(raw, profile, track, cumulative, manifest)
    write_report_bundle(args.out, report)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        spec = UniverseSpec.from_json(args.spec)
    except (KeyError, TypeError, ValueError) as err:
        raise QRiskError(f"bad universe spec: {err}") from err
    write_universe(spec, args.seed, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "risk":
            return _cmd_risk(args, parser)
        if args.command == "backtest":
            return _cmd_backtest(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        parser.error(f"unknown command {args.command!r}")
    except DOMAIN_ERRORS as err:
        print(f"qrisk: domain error: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    except FIT_ERRORS as err:
        print(f"qrisk: fit failed: {err}", file=sys.stderr)
        return EXIT_FIT
    except (OSError, json.JSONDecodeError, QRiskError, ValueError) as err:
        print(f"qrisk: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
