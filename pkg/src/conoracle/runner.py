"""Experiment runner: config parsing, validation, execution, artifact output.

A run is fully determined by its config plus master seed. Every run emits the
per-step records (CSV and JSONL), a summary JSON, and the resolved config
(all defaults and derived values made explicit) from which the run can be
reproduced byte for byte. Simulate mode also emits the generated tick stream
in the same CSV schema replay mode consumes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from . import amm
from .feeds import FIRST_TICK_SPREAD, ReplayEngine, Tick, read_csv, read_sources, write_csv
from .intervals import Interval, default_beta_hat
from .metrics import StepRecord, sliding_twap, summarize
from .predictors import BasePredictor, KalmanSettings, PredictorKind, make_predictor

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass(frozen=True)
class PredictorSettingsConfig:
    kind: str = PredictorKind.MVP_KALMAN.value
    sigma2_0: float = 1.0
    w_bar: float = 4.6
    v_bar: float | None = None
    w_bar_floor: float | None = None
    gamma_noise: float = 1e-3


@dataclass(frozen=True)
class MvpSettingsConfig:
    m: int = 100
    eta: float = 5.0
    r: int = 1000
    tau_max: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    mode: str
    k: int
    alpha: float = 0.01
    beta_hat: int | None = None
    nu: float | str = 0.0
    seed: int = 0
    warmup: int = 100
    twap_window: float = 600.0
    predictor: PredictorSettingsConfig = field(default_factory=PredictorSettingsConfig)
    mvp: MvpSettingsConfig = field(default_factory=MvpSettingsConfig)
    sim: amm.SimConfig | None = None
    csv_path: str | None = None


@dataclass(frozen=True)
class RunResult:
    records: list[StepRecord]
    summary: dict
    resolved: dict
    out_dir: Path
    paths: dict[str, str]


def _require(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}{key}: required field is missing")
    return mapping[key]


def _typed(value: Any, kind: type, path: str) -> Any:
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    raise ConfigError(f"{path}: expected {kind.__name__}, got {value!r}")


def _take(mapping: dict, key: str, kind: type, default: Any, path: str) -> Any:
    if key not in mapping or mapping[key] is None:
        return default
    return _typed(mapping[key], kind, f"{path}{key}")


def _check_known(mapping: dict, known: set[str], path: str) -> None:
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"{path}{sorted(unknown)[0]}: unknown field")


def _parse_nu(value: Any) -> float | str:
    if value is None or value == "zero":
        return 0.0
    if value == FIRST_TICK_SPREAD:
        return FIRST_TICK_SPREAD
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise ConfigError(f"nu: must be >= 0, got {value}")
        return float(value)
    raise ConfigError(f"nu: expected 'zero', '{FIRST_TICK_SPREAD}' or a number, got {value!r}")


def _parse_adversary(entries: Any, steps: int, path: str) -> tuple[amm.AdversarySwap, ...]:
    if entries is None:
        return ()
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: expected a list")
    swaps = []
    for i, entry in enumerate(entries):
        p = f"{path}[{i}]."
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}[{i}]: expected a mapping")
        _check_known(entry, {"step", "pool", "amount", "side", "reverse"}, p)
        try:
            swaps.append(
                amm.AdversarySwap(
                    step=_typed(_require(entry, "step", p), int, p + "step"),
                    pool=_typed(_require(entry, "pool", p), int, p + "pool"),
                    amount=_typed(_require(entry, "amount", p), float, p + "amount"),
                    side=_take(entry, "side", str, "x", p),
                    reverse=_take(entry, "reverse", bool, False, p),
                )
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}[{i}]: {exc}") from None
    return tuple(swaps)


def build_config(raw: dict) -> RunConfig:
    """Validate a plain config mapping into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a mapping at the top level")
    _check_known(
        raw,
        {
            "mode", "k", "alpha", "beta_hat", "nu", "seed", "warmup",
            "twap_window", "predictor", "mvp", "sim", "csv",
            # emitted by resolved_config.json; informational only
            "schema_version", "derived",
        },
        "",
    )
    mode = _typed(_require(raw, "mode", ""), str, "mode")
    if mode not in ("simulate", "replay"):
        raise ConfigError(f"mode: expected 'simulate' or 'replay', got {mode!r}")
    k = _typed(_require(raw, "k", ""), int, "k")
    if k < 1:
        raise ConfigError(f"k: need at least one source, got {k}")
    alpha = _take(raw, "alpha", float, 0.01, "")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha: must be in (0, 1), got {alpha}")
    beta_hat = _take(raw, "beta_hat", int, None, "")
    if beta_hat is not None and not 0 <= beta_hat < k:
        raise ConfigError(f"beta_hat: must satisfy 0 <= beta_hat < k, got {beta_hat}")
    seed = _take(raw, "seed", int, 0, "")
    warmup = _take(raw, "warmup", int, 100, "")
    if warmup < 0:
        raise ConfigError(f"warmup: must be >= 0, got {warmup}")
    twap_window = _take(raw, "twap_window", float, 600.0, "")
    if twap_window <= 0:
        raise ConfigError(f"twap_window: must be positive, got {twap_window}")

    pred_raw = raw.get("predictor") or {}
    if not isinstance(pred_raw, dict):
        raise ConfigError("predictor: expected a mapping")
    _check_known(
        pred_raw,
        {"kind", "sigma2_0", "w_bar", "v_bar", "w_bar_floor", "gamma_noise"},
        "predictor.",
    )
    kind = _take(pred_raw, "kind", str, PredictorKind.MVP_KALMAN.value, "predictor.")
    if kind not in (PredictorKind.MVP_KALMAN.value, PredictorKind.SIGMA_BPS.value):
        raise ConfigError(f"predictor.kind: unknown kind {kind!r}")
    predictor = PredictorSettingsConfig(
        kind=kind,
        sigma2_0=_take(pred_raw, "sigma2_0", float, 1.0, "predictor."),
        w_bar=_take(pred_raw, "w_bar", float, 4.6, "predictor."),
        v_bar=_take(pred_raw, "v_bar", float, None, "predictor."),
        w_bar_floor=_take(pred_raw, "w_bar_floor", float, None, "predictor."),
        gamma_noise=_take(pred_raw, "gamma_noise", float, 1e-3, "predictor."),
    )
    if predictor.sigma2_0 <= 0:
        raise ConfigError(f"predictor.sigma2_0: must be positive, got {predictor.sigma2_0}")

    mvp_raw = raw.get("mvp") or {}
    if not isinstance(mvp_raw, dict):
        raise ConfigError("mvp: expected a mapping")
    _check_known(mvp_raw, {"m", "eta", "r", "tau_max"}, "mvp.")
    mvp_cfg = MvpSettingsConfig(
        m=_take(mvp_raw, "m", int, 100, "mvp."),
        eta=_take(mvp_raw, "eta", float, 5.0, "mvp."),
        r=_take(mvp_raw, "r", int, 1000, "mvp."),
        tau_max=_take(mvp_raw, "tau_max", float, 1.0, "mvp."),
    )

    sim_cfg = None
    csv_path = None
    if mode == "simulate":
        sim_raw = raw.get("sim") or {}
        if not isinstance(sim_raw, dict):
            raise ConfigError("sim: expected a mapping")
        _check_known(
            sim_raw,
            {
                "steps", "seed", "n_pools", "init_reserve_x", "init_reserve_y",
                "fee", "trader_fraction", "trader_sigma", "trader_max_fraction",
                "arb_tolerance", "arb_max_rounds", "adversary",
            },
            "sim.",
        )
        steps = _typed(_require(sim_raw, "steps", "sim."), int, "sim.steps")
        n_pools = _take(sim_raw, "n_pools", int, k, "sim.")
        if n_pools != k:
            raise ConfigError(f"sim.n_pools: must equal k={k}, got {n_pools}")
        try:
            sim_cfg = amm.SimConfig(
                n_pools=n_pools,
                steps=steps,
                seed=_take(sim_raw, "seed", int, seed, "sim."),
                init_reserve_x=_take(sim_raw, "init_reserve_x", float, 10_000.0, "sim."),
                init_reserve_y=_take(sim_raw, "init_reserve_y", float, 1_000_000.0, "sim."),
                fee=_take(sim_raw, "fee", float, 0.0, "sim."),
                trader_fraction=_take(sim_raw, "trader_fraction", float, 0.003, "sim."),
                trader_sigma=_take(sim_raw, "trader_sigma", float, 1.0, "sim."),
                trader_max_fraction=_take(sim_raw, "trader_max_fraction", float, 0.1, "sim."),
                arb_tolerance=_take(sim_raw, "arb_tolerance", float, 0.002, "sim."),
                arb_max_rounds=_take(sim_raw, "arb_max_rounds", int, 10, "sim."),
                adversary=_parse_adversary(sim_raw.get("adversary"), steps, "sim.adversary"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"sim: {exc}") from None
    else:
        csv_path = _take(raw, "csv", str, None, "")
        if not csv_path:
            raise ConfigError("csv: replay mode needs an input file")

    return RunConfig(
        mode=mode,
        k=k,
        alpha=alpha,
        beta_hat=beta_hat,
        nu=_parse_nu(raw.get("nu")),
        seed=seed,
        warmup=warmup,
        twap_window=twap_window,
        predictor=predictor,
        mvp=mvp_cfg,
        sim=sim_cfg,
        csv_path=csv_path,
    )


def load_config(path: str | Path) -> dict:
    with Path(path).open() as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"config file {path} is empty")
    return raw


def source_seed(base: int, index: int) -> int:
    """Per-source predictor seed derived from the master seed."""
    return base * 1000 + index


def _build_predictors(cfg: RunConfig, sources: list[str]) -> dict[str, BasePredictor]:
    settings = KalmanSettings(
        sigma2_0=cfg.predictor.sigma2_0,
        w_bar=cfg.predictor.w_bar,
        v_bar=cfg.predictor.v_bar,
        w_bar_floor=cfg.predictor.w_bar_floor,
        gamma_noise=cfg.predictor.gamma_noise,
    )
    kind = PredictorKind(cfg.predictor.kind)
    alpha_k = cfg.alpha / cfg.k
    return {
        name: make_predictor(
            kind,
            alpha_k=alpha_k,
            settings=settings,
            m=cfg.mvp.m,
            eta=cfg.mvp.eta,
            r=cfg.mvp.r,
            tau_max=cfg.mvp.tau_max,
            seed=source_seed(cfg.seed, i),
        )
        for i, name in enumerate(sources)
    }


def _interval_cells(iv: Interval) -> list[str]:
    if iv.is_bounded:
        return [iv.kind, repr(iv.lo), repr(iv.hi)]
    return [iv.kind, "", ""]


def _interval_json(iv: Interval) -> dict:
    if iv.is_bounded:
        return {"kind": iv.kind, "lo": iv.lo, "hi": iv.hi}
    return {"kind": iv.kind}


def _write_records_csv(path: Path, sources: list[str], records: list[StepRecord]) -> None:
    import csv as _csv

    header = ["timestamp"]
    header += [f"label_{s}" for s in sources]
    for s in sources:
        header += [f"pre_{s}_kind", f"pre_{s}_lo", f"pre_{s}_hi"]
    for s in sources:
        header += [f"post_{s}_kind", f"post_{s}_lo", f"post_{s}_hi"]
    header += [
        "consensus_kind", "consensus_lo", "consensus_hi",
        "pseudo_label", "miscover", "size", "idk",
    ]
    with path.open("w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row: list[str] = [str(rec.timestamp)]
            row += [repr(rec.labels[s]) if s in rec.labels else "" for s in sources]
            for iv in rec.base_pre:
                row += _interval_cells(iv)
            for iv in rec.base_post:
                row += _interval_cells(iv)
            row += _interval_cells(rec.consensus)
            row += [
                repr(rec.pseudo_label),
                str(int(rec.miscover)),
                "" if rec.size is None else repr(rec.size),
                str(int(rec.idk)),
            ]
            writer.writerow(row)


def _write_records_jsonl(path: Path, sources: list[str], records: list[StepRecord]) -> None:
    with path.open("w") as fh:
        for rec in records:
            obj = {
                "timestamp": rec.timestamp,
                "labels": {s: rec.labels[s] for s in sources if s in rec.labels},
                "base_pre": [_interval_json(iv) for iv in rec.base_pre],
                "base_post": [_interval_json(iv) for iv in rec.base_post],
                "consensus": _interval_json(rec.consensus),
                "pseudo_label": rec.pseudo_label,
                "miscover": rec.miscover,
                "size": rec.size,
                "idk": rec.idk,
            }
            fh.write(json.dumps(obj) + "\n")


def _resolved_config(cfg: RunConfig, sources: list[str], nu_value: float) -> dict:
    resolved: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "k": cfg.k,
        "alpha": cfg.alpha,
        "beta_hat": cfg.beta_hat if cfg.beta_hat is not None else default_beta_hat(cfg.k),
        "nu": nu_value,
        "seed": cfg.seed,
        "warmup": cfg.warmup,
        "twap_window": cfg.twap_window,
        "predictor": asdict(cfg.predictor),
        "mvp": asdict(cfg.mvp),
        "derived": {
            "sources": sources,
            "source_seeds": [source_seed(cfg.seed, i) for i in range(len(sources))],
        },
    }
    if cfg.mode == "simulate":
        sim = asdict(cfg.sim)
        sim["adversary"] = [asdict(s) for s in cfg.sim.adversary]
        resolved["sim"] = sim
    else:
        resolved["csv"] = cfg.csv_path
    return resolved


def run(cfg: RunConfig, out_dir: str | Path) -> RunResult:
    """Execute a run and write its artifacts under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, str] = {}

    if cfg.mode == "simulate":
        ticks = amm.simulate(cfg.sim)
        sources = [amm.source_name(i) for i in range(cfg.sim.n_pools)]
        ticks_path = out / "ticks.csv"
        write_csv(ticks_path, sources, ticks)
        paths["ticks"] = str(ticks_path)
    else:
        sources = read_sources(cfg.csv_path)
        if len(sources) != cfg.k:
            raise ConfigError(
                f"k: config says {cfg.k} sources but {cfg.csv_path} has {len(sources)}"
            )
        ticks = read_csv(cfg.csv_path)

    beta_hat = cfg.beta_hat if cfg.beta_hat is not None else default_beta_hat(cfg.k)
    engine = ReplayEngine(
        sources=sources,
        predictors=_build_predictors(cfg, sources),
        beta_hat=beta_hat,
        nu=cfg.nu if cfg.nu != "zero" else 0.0,
    )
    for tick in ticks:
        engine.step(tick)
    records = engine.records

    summary = summarize(records, warmup=cfg.warmup)
    summary["schema_version"] = SCHEMA_VERSION
    summary["alpha"] = cfg.alpha
    summary["alpha_k"] = cfg.alpha / cfg.k
    summary["beta_hat"] = beta_hat
    summary["nu"] = engine.nu
    summary["sources"] = sources
    summary["baselines"] = {
        "median_series": summary.pop("median_series"),
        "twap": _twap_baselines(cfg, sources, ticks),
    }

    resolved = _resolved_config(cfg, sources, engine.nu)

    records_csv = out / "records.csv"
    _write_records_csv(records_csv, sources, records)
    paths["records_csv"] = str(records_csv)

    records_jsonl = out / "records.jsonl"
    _write_records_jsonl(records_jsonl, sources, records)
    paths["records_jsonl"] = str(records_jsonl)

    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    paths["summary"] = str(summary_path)

    resolved_path = out / "resolved_config.json"
    resolved_path.write_text(json.dumps(resolved, indent=2) + "\n")
    paths["resolved_config"] = str(resolved_path)

    return RunResult(
        records=records, summary=summary, resolved=resolved, out_dir=out, paths=paths
    )


def _twap_baselines(cfg: RunConfig, sources: list[str], ticks: list[Tick]) -> dict:
    out = {}
    for name in sources:
        ts = [t.timestamp for t in ticks if name in t.prices]
        ps = [t.prices[name] for t in ticks if name in t.prices]
        if len(ts) >= 2:
            out[name] = sliding_twap(ts, ps, cfg.twap_window)
        else:
            out[name] = [None] * len(ts)
    return out
