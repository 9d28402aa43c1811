"""Report bundle emission: versioned JSON plus flat CSVs.

All numbers are written with Python float repr (shortest round-trip), keys
are sorted, and nothing time- or host-dependent enters the bundle, so a
rerun over the same inputs produces byte-identical files.  NaN (an empty
bin in some cycle) serializes as null in JSON and an empty CSV field.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .backtest import Profile, RawBacktest

SCHEMA_VERSION = "1"

__all__ = [
    "SCHEMA_VERSION",
    "sha256_file",
    "run_manifest",
    "build_report",
    "write_report_bundle",
    "load_report",
]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def run_manifest(config_path, input_paths, master_seed: int) -> dict:
    """Provenance block embedded in every report: input hashes, seed, tool
    version.  Deliberately holds nothing run-specific (no output path, no
    timestamps) so reruns are byte-identical wherever they land."""
    from . import __version__

    hashes = {}
    for p in sorted(str(x) for x in input_paths):
        hashes[os.path.basename(p)] = sha256_file(p)
    return dict(
        config_path=os.path.basename(str(config_path)) if config_path else None,
        input_hashes=hashes,
        master_seed=int(master_seed),
        tool_version=__version__,
    )


def _clean(obj):
    """Make values JSON-safe and deterministic: numpy scalars to Python,
    arrays to lists, NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not np.isfinite(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _fmt(x) -> str:
    """CSV cell for a float: repr, empty for NaN/None."""
    if x is None:
        return ""
    f = float(x)
    return "" if not np.isfinite(f) else repr(f)


def build_report(
    raw: RawBacktest,
    profile: Profile,
    percentile: dict,
    cumulative: dict | None,
    manifest: dict,
) -> dict:
    cfg = raw.config
    cycles = []
    for c in raw.cycles:
        cycles.append(
            dict(
                index=c.index,
                start_date=c.start_date,
                horizon_days=c.horizon_days,
                truncated=c.truncated,
                market_forward_return=c.market_forward_return,
                market_params=dict(
                    q_minus=c.market_fit.neg.q,
                    b_minus=c.market_fit.neg.b,
                    q_plus=c.market_fit.pos.q,
                    b_plus=c.market_fit.pos.b,
                    q_sym=c.market_sym.q,
                    b_sym=c.market_sym.b,
                ),
                n_admitted=c.n_admitted,
                n_binned=int(sum(c.bin_counts)),
                bin_counts=list(c.bin_counts),
                bin_excess=list(c.bin_excess),
                records=[
                    dict(
                        ticker=r.ticker,
                        risks={k.value: v for k, v in sorted(r.risks.items(), key=lambda kv: kv[0].value)},
                        excess_return=r.excess_return,
                        forward_return=r.forward_return,
                        bin_index=r.bin_index,
                    )
                    for r in c.records
                ],
                exclusions=[list(x) for x in c.exclusions],
            )
        )
    report = dict(
        schema_version=SCHEMA_VERSION,
        run_manifest=manifest,
        config=dict(
            window=cfg.window,
            fit_lag=cfg.fit_lag,
            horizon=cfg.horizon,
            shift=cfg.shift,
            risk_kind=cfg.risk_kind.value,
            target_per_bin=cfg.target_per_bin,
            extra_high_bins=cfg.extra_high_bins,
            risk_cutoff=cfg.risk_cutoff,
            master_seed=cfg.master_seed,
        ),
        return_convention=(
            f"overlapping {cfg.fit_lag}-day percent returns inside the "
            f"{cfg.window}-price estimation window ({cfg.window - cfg.fit_lag} points)"
        ),
        n_universe=raw.n_universe,
        bin_edges=list(raw.bin_spec.edges),
        cycles=cycles,
        profile=dict(
            risk_kind=profile.risk_kind.value,
            s=list(profile.s),
            e_rel=list(profile.e_rel),
            n_cycles_occupied=list(profile.n_cycles_occupied),
            total_members=list(profile.total_members),
            p0=profile.p0,
            p1=profile.p1,
            chi2=profile.chi2,
        ),
        percentile_track=percentile,
        cumulative=cumulative,
    )
    return _clean(report)


def write_report_bundle(out_dir, report: dict) -> list[str]:
    """Write report.json and the flat CSVs; returns the paths written.

    On any failure the partially written files are removed.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def target(name: str) -> str:
        path = os.path.join(out_dir, name)
        written.append(path)
        return path

    try:
        with open(target("report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")

        prof = report["profile"]
        with open(target("profile.csv"), "w", newline="") as fh:
            fh.write(
                f"# fit: p0={_fmt(prof['p0'])} p1={_fmt(prof['p1'])} "
                f"chi2={_fmt(prof['chi2'])}\n"
            )
            fh.write("s,e_rel,fit,n_cycles_occupied,total_members\n")
            for s, e, occ, tot in zip(
                prof["s"], prof["e_rel"], prof["n_cycles_occupied"], prof["total_members"]
            ):
                fitted = prof["p0"] + prof["p1"] * s
                fh.write(f"{_fmt(s)},{_fmt(e)},{_fmt(fitted)},{occ},{tot}\n")

        track = report["percentile_track"]
        kinds = sorted(track["series"])
        with open(target("percentile.csv"), "w", newline="") as fh:
            fh.write("date," + ",".join(kinds) + "\n")
            for i, date in enumerate(track["dates"]):
                cells = [_fmt(track["series"][k][i]) for k in kinds]
                fh.write(f"{date}," + ",".join(cells) + "\n")

        cumulative = report.get("cumulative")
        if cumulative is not None:
            kinds = sorted(cumulative["portfolio_pct"])
            with open(target("cumulative.csv"), "w", newline="") as fh:
                fh.write(
                    "maturity_date,"
                    + ",".join(f"portfolio_{k}" for k in kinds)
                    + ",market\n"
                )
                for i, date in enumerate(cumulative["maturity_dates"]):
                    cells = [_fmt(cumulative["portfolio_pct"][k][i]) for k in kinds]
                    cells.append(_fmt(cumulative["market_pct"][i]))
                    fh.write(f"{date}," + ",".join(cells) + "\n")

            label = {
                "atre": "asymmetric_total",
                "s_minus": "asymmetric_s_minus",
                "s_plus": "asymmetric_s_plus",
                "tre_sym": "symmetric",
                "capm_beta": "capm_beta",
            }
            with open(target("stats.csv"), "w", newline="") as fh:
                fh.write(
                    "risk_measure,mean_pct_earnings,median_pct_earnings,std_pct_earnings\n"
                )
                for k in ("atre", "s_minus", "tre_sym"):
                    if k not in cumulative["stats"]:
                        continue
                    st = cumulative["stats"][k]
                    fh.write(
                        f"{label[k]},{_fmt(st['mean_pct'])},"
                        f"{_fmt(st['median_pct'])},{_fmt(st['std_pct'])}\n"
                    )
                st = cumulative["market_stats"]
                fh.write(
                    f"market,{_fmt(st['mean_pct'])},{_fmt(st['median_pct'])},"
                    f"{_fmt(st['std_pct'])}\n"
                )

        with open(target("exclusions.csv"), "w", newline="") as fh:
            fh.write("ticker,cycle,reason\n")
            for cyc in report["cycles"]:
                for ticker, reason in cyc["exclusions"]:
                    safe = reason.replace('"', "'")
                    fh.write(f'{ticker},{cyc["index"]},"{safe}"\n')
    except BaseException:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise
    return written


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
