"""Batch command-line pipelines over the analytics modules.

Every subcommand reads an optional JSON config file, applies flag
overrides on top (flag > config > default), writes its CSV/JSON
artifacts into the output directory, and drops a ``manifest.json``
(effective config, seed, library versions) so any run can be
reproduced exactly.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from . import __version__
from . import backtest as bt
from .dynamics import (
    JumpSpec,
    OuGbmParams,
    logret_mean_argmax,
    mc_report,
    theory_curves,
)
from .errors import ConfigError, DataError, NumericalError, OfilabError
from .metrics import (
    CANONICAL,
    CONVENTIONS,
    contributions,
    window_metrics,
    windows_by_seconds,
    windows_by_ticks,
    write_metrics_csv,
)
from .stats import (
    REGIME_KINDS,
    autocorr,
    descriptive,
    pearson_corr,
    regime_frame,
    regime_report,
)
from .synth import SyntheticConfig, generate_synthetic
from .ticks import SessionSpec, filter_sessions, parse_ticks, serialize_ticks

__all__ = ["main"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# wall-clock window ladder used by `correlate` (seconds)
CORRELATE_WINDOWS = (0.5, 1, 2, 5, 10, 20, 30, 60, 120, 300, 600, 1200, 1800, 3600)
CORRELATE_ROWS = (("OFI", "OFI"), ("TI", "TI"), ("Lambda", "Lmda"), ("AvgEn", "AgEn"))

MODEL_KEYS = ("theta", "sigma", "rho", "k", "mu_l", "dt",
              "jump_rate", "jump_scale", "sigma_levy_sq")
SYNTH_KEYS = ("n_ticks", "seed", "params", "initial_price", "tick_dt_s",
              "qty_noise", "session_ticks", "session_gap_ms", "session_prefix",
              "start_ms", "trade_ar1", "trade_scale", "burn_in")


@dataclass
class RunConfig:
    """Effective per-run settings after merging defaults, file, and flags."""

    subcommand: str
    out_dir: Path
    input: Optional[str]
    synth: Optional[dict]
    seed: Optional[int]
    params: dict


# ---------------------------------------------------------------------------
# plumbing


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _merge(defaults: dict, block: Any, flags: dict, context: str) -> dict:
    if block is None:
        block = {}
    if not isinstance(block, dict):
        raise ConfigError(f"config block {context!r} must be a JSON object")
    unknown = set(block) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in config block {context!r}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(block)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _flatten_synth(block: Any) -> dict:
    """Lift a nested synth config block into a flat key space."""
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError("config block 'synth' must be a JSON object")
    unknown = set(block) - set(SYNTH_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in config block 'synth': {sorted(unknown)}")
    flat = {k: v for k, v in block.items() if k != "params"}
    model = block.get("params") or {}
    if not isinstance(model, dict):
        raise ConfigError("'synth.params' must be a JSON object")
    unknown = set(model) - set(MODEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in 'synth.params': {sorted(unknown)}")
    flat.update(model)
    return flat


def _structure_synth(flat: dict) -> dict:
    """Inverse of _flatten_synth, dropping unset keys."""
    out = {k: v for k, v in flat.items()
           if k in SYNTH_KEYS and k != "params" and v is not None}
    model = {k: v for k, v in flat.items() if k in MODEL_KEYS and v is not None}
    if model:
        out["params"] = model
    return out


def _resolve_jump(params: dict, explicit: set) -> None:
    """An explicit jump_scale displaces the default sigma_levy_sq."""
    if "jump_scale" in explicit and "sigma_levy_sq" not in explicit:
        params["sigma_levy_sq"] = None


def _prepare(args: argparse.Namespace, defaults: dict, flags: dict) -> RunConfig:
    file_cfg = _load_config_file(args.config)
    block_name = args.subcommand.replace("-", "_")
    explicit = set(k for k, v in flags.items() if v is not None)
    if args.subcommand == "synth":
        file_block = _flatten_synth(file_cfg.get("synth"))
        params = _merge(defaults, file_block, flags, "synth")
        explicit |= set(file_block)
        _resolve_jump(params, explicit)
        synth_block = _structure_synth(params)
    else:
        file_block = file_cfg.get(block_name)
        params = _merge(defaults, file_block, flags, block_name)
        if isinstance(file_block, dict):
            explicit |= set(file_block)
        if "jump_scale" in params:
            _resolve_jump(params, explicit)
        synth_block = file_cfg.get("synth")
        if synth_block is not None:
            synth_block = _structure_synth(_flatten_synth(synth_block))

    out_dir = Path(args.out if args.out is not None else file_cfg.get("out_dir", "out"))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")

    seed = args.seed if args.seed is not None else file_cfg.get("seed")
    input_path = getattr(args, "input", None)
    if input_path is None:
        input_path = file_cfg.get("input")
    return RunConfig(
        subcommand=args.subcommand,
        out_dir=out_dir,
        input=input_path,
        synth=synth_block,
        seed=int(seed) if seed is not None else None,
        params=params,
    )


def _model_params(d: dict, context: str = "params") -> OuGbmParams:
    unknown = set(d) - set(MODEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {context!r}: {sorted(unknown)}")
    if "theta" not in d:
        raise ConfigError(f"{context!r} requires theta")
    common = {
        "sigma": float(d.get("sigma", 0.0)),
        "rho": float(d.get("rho", 1.0)),
        "k": float(d.get("k", 1.0)),
        "mu_l": float(d.get("mu_l", 0.0)),
        "dt": float(d.get("dt", 0.01)),
    }
    theta = float(d["theta"])
    if d.get("sigma_levy_sq") is not None:
        if d.get("jump_scale") is not None:
            raise ConfigError(f"{context!r}: give sigma_levy_sq or jump_scale, not both")
        return OuGbmParams.from_levy_variance(
            theta, float(d["sigma_levy_sq"]),
            jump_rate=float(d.get("jump_rate", 1.0)), **common,
        )
    jump = JumpSpec(rate=float(d.get("jump_rate", 1.0)),
                    scale=float(d.get("jump_scale", 0.1)))
    return OuGbmParams(theta=theta, jump=jump, **common)


def _synth_config(block: dict, run_seed: Optional[int]) -> SyntheticConfig:
    if "n_ticks" not in block:
        raise ConfigError("synth config requires n_ticks")
    seed = block.get("seed", run_seed)
    if seed is None:
        seed = 0
    kwargs = {}
    for key in ("initial_price", "tick_dt_s", "qty_noise", "trade_ar1", "trade_scale"):
        if key in block:
            kwargs[key] = float(block[key])
    for key in ("session_ticks", "session_gap_ms", "start_ms", "burn_in"):
        if key in block:
            kwargs[key] = int(block[key])
    if "session_prefix" in block:
        kwargs["session_prefix"] = str(block["session_prefix"])
    model = block.get("params")
    if model:
        # partial model blocks inherit the tuned generator defaults
        filled = dict(_SYNTH_MODEL_DEFAULTS)
        if "jump_scale" in model and "sigma_levy_sq" not in model:
            filled.pop("sigma_levy_sq")
        filled.update(model)
        kwargs["params"] = _model_params(filled, "synth.params")
    return SyntheticConfig(n_ticks=int(block["n_ticks"]), seed=int(seed), **kwargs)


def _load_ticks(cfg: RunConfig):
    """Resolve the one data source: an input CSV or an inline synth config."""
    if (cfg.input is None) == (cfg.synth is None):
        raise ConfigError(
            "exactly one data source required: --input PATH or a 'synth' config block"
        )
    if cfg.input is not None:
        return parse_ticks(cfg.input)
    return generate_synthetic(_synth_config(cfg.synth, cfg.seed))


def _load_filtered(cfg: RunConfig):
    raw = _load_ticks(cfg)
    spec = SessionSpec(trim_count=int(cfg.params.get("trim_count", 60)))
    result = filter_sessions(raw, spec)
    if len(result.ticks) == 0:
        raise DataError("no ticks survive session filtering")
    return result


def _event_series(ticks, kind: str, convention: str) -> np.ndarray:
    if kind not in REGIME_KINDS:
        raise ConfigError(f"unknown series kind {kind!r}; expected one of {REGIME_KINDS}")
    contrib = contributions(ticks, convention)
    if kind == "e":
        return contrib.e[contrib.valid]
    if kind == "omega":
        return contrib.omega[contrib.valid]
    mid = ticks.mid_price()
    dmid = mid[1:] - mid[:-1]
    return dmid[ticks.in_session[1:]]


def _win_label(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:g}s"
    if seconds < 3600:
        return f"{seconds / 60:g}m"
    return f"{seconds / 3600:g}h"


def _manifest(cfg: RunConfig, outputs: list[str], extra: Optional[dict] = None) -> None:
    doc = {
        "subcommand": cfg.subcommand,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "out_dir": str(cfg.out_dir),
        "input": cfg.input,
        "synth": cfg.synth,
        "seed": cfg.seed,
        "params": cfg.params,
        "versions": {
            "python": platform.python_version(),
            "ofilab": __version__,
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    _write_json(cfg.out_dir / "manifest.json", doc)


def _dropped_info(result) -> dict:
    return {
        "dropped_sessions": [
            {"session_id": d.session_id, "n_ticks": d.n_ticks, "reason": d.reason}
            for d in result.dropped
        ]
    }


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth(cfg: RunConfig) -> int:
    if cfg.input is not None:
        raise ConfigError("synth generates data and takes no --input")
    if cfg.synth is None or "n_ticks" not in cfg.synth:
        raise ConfigError("synth requires --n-ticks or a 'synth' config block")
    ticks = generate_synthetic(_synth_config(cfg.synth, cfg.seed))
    dest = cfg.out_dir / "ticks.csv"
    serialize_ticks(ticks, dest)
    _manifest(cfg, ["ticks.csv"], {"n_ticks": len(ticks)})
    log.info("wrote %s (%d ticks)", dest, len(ticks))
    return EXIT_OK


def _cmd_metrics(cfg: RunConfig) -> int:
    p = cfg.params
    if (p["window_seconds"] is None) == (p["window_ticks"] is None):
        raise ConfigError("metrics needs exactly one of window_seconds/window_ticks")
    result = _load_filtered(cfg)
    ticks = result.ticks
    if p["window_ticks"] is not None:
        windows = windows_by_ticks(ticks, int(p["window_ticks"]))
    else:
        windows = windows_by_seconds(ticks, float(p["window_seconds"]))
    if not windows:
        raise DataError("no complete metric windows fit in the filtered data")
    by_kind = window_metrics(ticks, windows, convention=p["convention"])
    write_metrics_csv(by_kind, cfg.out_dir / "metrics.csv")
    _manifest(cfg, ["metrics.csv"],
              {"n_windows": len(windows), **_dropped_info(result)})
    return EXIT_OK


def _cmd_autocorr(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    series = _event_series(result.ticks, p["series"], p["convention"])
    report = autocorr(series, int(p["max_lag"]))
    frame = pd.DataFrame({
        "lag": report.lags,
        "rho": report.rho,
        "cum_rho": report.cum_rho,
    })
    frame.to_csv(cfg.out_dir / "autocorr.csv", index=False, lineterminator="\n")
    _write_json(cfg.out_dir / "autocorr.json", {
        "series": p["series"],
        "n": report.n,
        "se": report.se,
        "lags": report.lags,
        "rho": report.rho,
        "cum_rho": report.cum_rho,
    })
    _manifest(cfg, ["autocorr.csv", "autocorr.json"], _dropped_info(result))
    return EXIT_OK


def _cmd_correlate(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    ticks = result.ticks
    contrib = contributions(ticks, p["convention"])
    widths = [float(w) for w in p["windows_seconds"]]
    if not widths:
        raise ConfigError("correlate needs a non-empty windows_seconds list")
    labels = [_win_label(w) for w in widths]
    table = {label: {} for label in labels}
    for width, label in zip(widths, labels):
        windows = windows_by_seconds(ticks, width)
        if not windows:
            for kind, _ in CORRELATE_ROWS:
                table[label][kind] = math.nan
            continue
        by_kind = window_metrics(ticks, windows, contrib=contrib)
        dp = by_kind["DP"].values
        for kind, _ in CORRELATE_ROWS:
            vals = by_kind[kind].values
            keep = np.isfinite(vals) & np.isfinite(dp)
            try:
                table[label][kind] = pearson_corr(vals[keep], dp[keep])
            except OfilabError:
                table[label][kind] = math.nan
    lines = ["Metric," + ",".join(labels)]
    for kind, row_label in CORRELATE_ROWS:
        cells = [
            "" if math.isnan(table[lab][kind]) else repr(table[lab][kind])
            for lab in labels
        ]
        lines.append(row_label + "," + ",".join(cells))
    (cfg.out_dir / "correlate.csv").write_text("\n".join(lines) + "\n")
    _manifest(cfg, ["correlate.csv"], _dropped_info(result))
    return EXIT_OK


def _cmd_describe(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    series = _event_series(result.ticks, p["series"], p["convention"])
    stats = descriptive(series)
    lines = [
        "Mean,Std,Skewness,Kurtosis",
        ",".join(repr(float(v)) if not math.isnan(v) else ""
                 for v in (stats.mean, stats.std, stats.skewness, stats.kurtosis)),
    ]
    (cfg.out_dir / "describe.csv").write_text("\n".join(lines) + "\n")
    _write_json(cfg.out_dir / "describe.json", {
        "series": p["series"],
        "n": stats.n,
        "mean": stats.mean,
        "std": stats.std,
        "skewness": stats.skewness,
        "kurtosis": stats.kurtosis,
        "moments_defined": stats.moments_defined,
    })
    _manifest(cfg, ["describe.csv", "describe.json"], _dropped_info(result))
    return EXIT_OK


def _cmd_regime(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    report = regime_report(result.ticks, kind=p["kind"], max_lag=int(p["max_lag"]),
                           convention=p["convention"])
    regime_frame(report).to_csv(cfg.out_dir / "regime.csv", index=False,
                                lineterminator="\n")
    _write_json(cfg.out_dir / "regime.json", {
        "kind": report.kind,
        "convention": report.convention,
        "max_lag": report.max_lag,
        "weak": report.weak,
        "sign_flip_lags": list(report.sign_flip_lags),
        "months": [
            {
                "month": row.month,
                "n_events": row.n_events,
                "low_confidence": row.low_confidence,
                "rho": None if row.acf is None else row.acf.rho,
                "price_corr": row.price_corr,
                "stats": None if row.stats is None else {
                    "mean": row.stats.mean,
                    "std": row.stats.std,
                    "skewness": row.stats.skewness,
                    "kurtosis": row.stats.kurtosis,
                    "n": row.stats.n,
                },
            }
            for row in report.months
        ],
    })
    _manifest(cfg, ["regime.csv", "regime.json"], _dropped_info(result))
    return EXIT_OK


def _cmd_theory_curves(cfg: RunConfig) -> int:
    p = cfg.params
    mu0 = float(p["mu0"])
    theta = float(p["theta"])
    sigma = float(p["sigma"])
    slsq = float(p["sigma_levy_sq"])
    t_max = float(p["t_max"])
    t_step = float(p["t_step"])
    if t_max <= 0 or t_step <= 0:
        raise ConfigError("t_max and t_step must be positive")
    ts = np.arange(t_step, t_max + 0.5 * t_step, t_step)
    mean, std, qs = theory_curves(mu0, theta, sigma, slsq, ts)
    pd.DataFrame({
        "t": ts, "ExpLogReturn": mean, "StdLogReturn": std, "QuasiSharpe": qs,
    }).to_csv(cfg.out_dir / "theory_curves.csv", index=False, lineterminator="\n")
    extra: dict = {}
    try:
        t_star, peak = logret_mean_argmax(mu0, theta, sigma)
        extra["argmax"] = {"t_star": t_star, "max_mean": peak}
    except OfilabError as exc:
        extra["argmax"] = {"error": str(exc)}
    _write_json(cfg.out_dir / "theory_curves.json", {
        "mu0": mu0, "theta": theta, "sigma": sigma, "sigma_levy_sq": slsq,
        **extra,
    })
    _manifest(cfg, ["theory_curves.csv", "theory_curves.json"])
    return EXIT_OK


def _cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    params = _model_params({k: p[k] for k in MODEL_KEYS if p.get(k) is not None},
                           "simulate")
    times = [float(t) for t in p["times"]]
    if not times:
        raise ConfigError("simulate needs a non-empty times list")
    seed = cfg.seed if cfg.seed is not None else 0
    checks = mc_report(params, float(p["mu0"]), times, int(p["n_paths"]), seed)
    frame = pd.DataFrame({
        "quantity": [c.quantity for c in checks],
        "t": [c.t for c in checks],
        "theory": [c.theory for c in checks],
        "estimate": [c.estimate for c in checks],
        "se": [c.se for c in checks],
        "n_se": [c.n_se for c in checks],
        "ok": [c.ok for c in checks],
    })
    frame.to_csv(cfg.out_dir / "simulate.csv", index=False, lineterminator="\n")
    n_fail = int(sum(not c.ok for c in checks))
    _write_json(cfg.out_dir / "simulate.json", {
        "mu0": float(p["mu0"]),
        "n_paths": int(p["n_paths"]),
        "seed": seed,
        "n_checks": len(checks),
        "n_failed": n_fail,
        "checks": frame.to_dict(orient="records"),
    })
    _manifest(cfg, ["simulate.csv", "simulate.json"], {"n_failed": n_fail})
    if n_fail:
        log.error("%d of %d moment checks beyond 3 standard errors", n_fail, len(checks))
        return EXIT_NUMERICAL
    return EXIT_OK


def _grid_common(p: dict) -> dict:
    out = {
        "cv_folds": int(p["cv_folds"]),
        "n_jobs": int(p["n_jobs"]) if p["n_jobs"] is not None else (os.cpu_count() or 1),
    }
    if p.get("lam_grid") is not None:
        out["lam_grid"] = np.asarray([float(v) for v in p["lam_grid"]])
    else:
        out["lam_grid"] = None
    return out


def _cmd_backtest(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    grid = bt.GridSpec(
        hist_wins=tuple(int(h) for h in p["hist_wins"]),
        horizons=tuple(int(t) for t in p["horizons"]),
        train_frac=float(p["train_frac"]),
    )
    common = _grid_common(p)
    rows = bt.run_grid(result.ticks, grid, convention=p["convention"],
                       cv_folds=common["cv_folds"], lam_grid=common["lam_grid"],
                       n_jobs=common["n_jobs"])
    bt.write_backtest_csv(rows, cfg.out_dir / "backtest.csv")
    _write_json(cfg.out_dir / "backtest.json", bt.backtest_report(rows))
    curves = bt.grid_curves_frame(rows)
    curves.to_csv(cfg.out_dir / "backtest_curves.csv", index=False,
                  lineterminator="\n")
    n_failed = sum(r.error is not None for r in rows)
    _manifest(cfg, ["backtest.csv", "backtest.json", "backtest_curves.csv"],
              {"n_cells": len(rows), "n_failed": n_failed, **_dropped_info(result)})
    if n_failed == len(rows):
        log.error("all %d grid cells failed", len(rows))
        return EXIT_DATA
    return EXIT_OK


def _cmd_combo(cfg: RunConfig) -> int:
    p = cfg.params
    result = _load_filtered(cfg)
    combos = [bt.ComboSpec(partner=str(name), hist_win=int(p["hist_win"]))
              for name in p["partners"]]
    horizons = tuple(int(t) for t in p["horizons"])
    common = _grid_common(p)
    rows = bt.run_combo(result.ticks, combos, horizons,
                        convention=p["convention"],
                        train_frac=float(p["train_frac"]),
                        cv_folds=common["cv_folds"], lam_grid=common["lam_grid"],
                        n_jobs=common["n_jobs"])
    bt.write_backtest_csv(rows, cfg.out_dir / "combo.csv", combo=True)
    _write_json(cfg.out_dir / "combo.json", bt.backtest_report(rows))
    curves = bt.combo_curves_frame(rows)
    curves.to_csv(cfg.out_dir / "combo_curves.csv", index=False, lineterminator="\n")
    n_failed = sum(r.error is not None for r in rows)
    _manifest(cfg, ["combo.csv", "combo.json", "combo_curves.csv"],
              {"n_cells": len(rows), "n_failed": n_failed, **_dropped_info(result)})
    if n_failed == len(rows):
        log.error("all %d combo cells failed", len(rows))
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofilab",
        description="Order-flow tick analytics: metrics, model curves, "
                    "Monte Carlo checks, and LASSO backtests.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, help_text: str, data: bool = True) -> argparse.ArgumentParser:
        sp = subs.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="run seed")
        if data:
            sp.add_argument("--input", help="tick CSV input path")
            sp.add_argument("--trim-count", type=int, dest="trim_count",
                            help="ticks trimmed from each session edge (default 60)")
            sp.add_argument("--convention", choices=CONVENTIONS,
                            help="e_n convention (default canonical)")
        return sp

    sp = add("synth", "generate a synthetic tick CSV", data=False)
    sp.add_argument("--n-ticks", type=int, dest="n_ticks")
    for flag, dest in (("--theta", "theta"), ("--sigma", "sigma"), ("--rho", "rho"),
                       ("--k", "k"), ("--mu-l", "mu_l"),
                       ("--sigma-levy-sq", "sigma_levy_sq"),
                       ("--jump-rate", "jump_rate"), ("--jump-scale", "jump_scale"),
                       ("--initial-price", "initial_price"),
                       ("--qty-noise", "qty_noise"), ("--tick-dt-s", "tick_dt_s")):
        sp.add_argument(flag, type=float, dest=dest)
    sp.add_argument("--session-ticks", type=int, dest="session_ticks")

    sp = add("metrics", "windowed OFI/TI/Lambda/AvgEn/DP series")
    sp.add_argument("--window-seconds", type=float, dest="window_seconds")
    sp.add_argument("--window-ticks", type=int, dest="window_ticks")

    sp = add("autocorr", "autocorrelation of a per-event series")
    sp.add_argument("--series", choices=REGIME_KINDS)
    sp.add_argument("--max-lag", type=int, dest="max_lag")

    add("correlate", "metric vs price-change correlation across window sizes")

    sp = add("describe", "descriptive statistics of a per-event series")
    sp.add_argument("--series", choices=REGIME_KINDS)

    sp = add("regime", "per-month autocorrelation table and weak-metric flags")
    sp.add_argument("--kind", choices=REGIME_KINDS)
    sp.add_argument("--max-lag", type=int, dest="max_lag")

    sp = add("theory-curves", "closed-form return moment curves", data=False)
    for flag, dest in (("--mu0", "mu0"), ("--theta", "theta"), ("--sigma", "sigma"),
                       ("--sigma-levy-sq", "sigma_levy_sq"),
                       ("--t-max", "t_max"), ("--t-step", "t_step")):
        sp.add_argument(flag, type=float, dest=dest)

    sp = add("simulate", "Monte Carlo vs closed-form moment report", data=False)
    for flag, dest in (("--mu0", "mu0"), ("--theta", "theta"), ("--sigma", "sigma"),
                       ("--sigma-levy-sq", "sigma_levy_sq"), ("--dt", "dt")):
        sp.add_argument(flag, type=float, dest=dest)
    sp.add_argument("--n-paths", type=int, dest="n_paths")
    sp.add_argument("--times", type=_float_list)

    sp = add("backtest", "single-factor LASSO grid over windows and horizons")
    sp.add_argument("--hist-wins", type=_int_list, dest="hist_wins")
    sp.add_argument("--horizons", type=_int_list)
    sp.add_argument("--train-frac", type=float, dest="train_frac")
    sp.add_argument("--cv-folds", type=int, dest="cv_folds")
    sp.add_argument("--n-jobs", type=int, dest="n_jobs")

    sp = add("combo", "two-factor backtest: OFI paired with partner metrics")
    sp.add_argument("--partners", type=lambda s: [v.strip() for v in s.split(",") if v.strip()])
    sp.add_argument("--hist-win", type=int, dest="hist_win")
    sp.add_argument("--horizons", type=_int_list)
    sp.add_argument("--train-frac", type=float, dest="train_frac")
    sp.add_argument("--cv-folds", type=int, dest="cv_folds")
    sp.add_argument("--n-jobs", type=int, dest="n_jobs")

    return parser


_SYNTH_MODEL_DEFAULTS = {"theta": 0.5, "sigma": 1.5e-5, "rho": 1.0, "k": 2.8e-5,
                         "sigma_levy_sq": 8.0}
_DEFAULT_MODEL = dict(_SYNTH_MODEL_DEFAULTS, mu_l=None, dt=None,
                      jump_rate=None, jump_scale=None)

_COMMANDS: dict = {
    "synth": (_cmd_synth, dict(_DEFAULT_MODEL, n_ticks=None, seed=None,
                               initial_price=None, tick_dt_s=None, qty_noise=None,
                               session_ticks=None, session_gap_ms=None,
                               session_prefix=None, start_ms=None, trade_ar1=None,
                               trade_scale=None, burn_in=None)),
    "metrics": (_cmd_metrics, {"window_seconds": None, "window_ticks": None,
                               "convention": CANONICAL, "trim_count": 60}),
    "autocorr": (_cmd_autocorr, {"series": "e", "max_lag": 10,
                                 "convention": CANONICAL, "trim_count": 60}),
    "correlate": (_cmd_correlate, {"windows_seconds": list(CORRELATE_WINDOWS),
                                   "convention": CANONICAL, "trim_count": 60}),
    "describe": (_cmd_describe, {"series": "e", "convention": CANONICAL,
                                 "trim_count": 60}),
    "regime": (_cmd_regime, {"kind": "e", "max_lag": 10,
                             "convention": CANONICAL, "trim_count": 60}),
    "theory_curves": (_cmd_theory_curves, {"mu0": 10.0, "theta": 0.5, "sigma": 1.0,
                                           "sigma_levy_sq": 0.04, "t_max": 50.0,
                                           "t_step": 0.01}),
    "simulate": (_cmd_simulate, {"mu0": 10.0, "theta": 0.5, "sigma": 1.0,
                                 "sigma_levy_sq": 0.04, "dt": 0.01,
                                 "rho": None, "k": None, "mu_l": None,
                                 "jump_rate": None, "jump_scale": None,
                                 "times": [0.5, 1.0, 2.0, 5.0], "n_paths": 20_000}),
    "backtest": (_cmd_backtest, {"hist_wins": list(bt.GridSpec().hist_wins),
                                 "horizons": list(bt.GridSpec().horizons),
                                 "train_frac": 0.8, "cv_folds": 5, "lam_grid": None,
                                 "n_jobs": None, "convention": CANONICAL,
                                 "trim_count": 60}),
    "combo": (_cmd_combo, {"partners": list(bt.PARTNERS), "hist_win": 2,
                           "horizons": list(bt.GridSpec().horizons),
                           "train_frac": 0.8, "cv_folds": 5, "lam_grid": None,
                           "n_jobs": None, "convention": CANONICAL,
                           "trim_count": 60}),
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler, defaults = _COMMANDS[args.subcommand.replace("-", "_")]
    flags = {k: v for k, v in vars(args).items()
             if k not in ("subcommand", "config", "out", "seed", "input")}
    try:
        cfg = _prepare(args, defaults, flags)
        return handler(cfg)
    except ConfigError as exc:
        print(f"ofilab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"ofilab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"ofilab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OfilabError as exc:
        print(f"ofilab: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
