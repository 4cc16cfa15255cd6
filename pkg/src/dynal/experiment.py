"""Declarative experiment runner.

A YAML config names the oracle(s), the strategy list, the budgets, and the
sampler settings; the runner executes the full strategy x repetition grid
with per-run seeds derived deterministically from the master seed, and
writes machine-readable result tables (``results.csv``, ``summary.csv``,
plus chain diagnostics for the proposed strategy).
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .benchmarks import BENCHMARKS, build_pool, get_benchmark
from .data_io import TabularSchema, load_csv
from .loop import (
    LoopSettings,
    RunRecord,
    Strategy,
    SyntheticOracle,
    TabularOracle,
    run_active_learning,
)
from .tradeoff import HyperPriorBounds, McmcConfig

RESULT_COLUMNS = ("strategy", "oracle", "repetition", "iteration", "rmse",
                  "eta_bar", "chosen_index", "chosen_point", "wall_ms")


class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class PoolSpec:
    grid_1d: int = 1000
    grid_2d: int = 50
    lhs: int = 2000


@dataclass(frozen=True)
class OracleSpec:
    """Either a benchmark id or a CSV path plus schema."""

    name: str
    csv_path: Optional[str] = None
    schema: Optional[TabularSchema] = None

    @property
    def is_tabular(self) -> bool:
        return self.csv_path is not None


@dataclass(frozen=True)
class ExperimentConfig:
    oracles: Tuple[OracleSpec, ...]
    strategies: Tuple[Strategy, ...]
    budget: int = 100
    n_initial: int = 3
    repetitions: int = 100
    pool: PoolSpec = field(default_factory=PoolSpec)
    snr_db: float = 10.0
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    nu: float = 0.001
    bounds: HyperPriorBounds = field(default_factory=HyperPriorBounds)
    optimizer_restarts: int = 8
    master_seed: int = 0


def _parse_strategy(d: dict, errors: List[str], where: str) -> Optional[Strategy]:
    try:
        return Strategy(
            kind=str(d.get("kind", "")),
            explore_kind=str(d.get("explore_kind", "igs")),
            eta=d.get("eta"),
            decay=float(d.get("decay", 0.7)),
        )
    except Exception as exc:
        errors.append(f"{where}: {exc}")
        return None


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate and convert a parsed YAML mapping; raises ConfigError with
    all diagnostics aggregated."""
    errors: List[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping"])

    oracle_field = raw.get("oracle")
    oracles: List[OracleSpec] = []
    if oracle_field is None:
        errors.append("oracle: missing")
    else:
        entries = oracle_field if isinstance(oracle_field, list) else [oracle_field]
        for k, entry in enumerate(entries):
            where = f"oracle[{k}]"
            if isinstance(entry, str):
                if entry.lower() not in BENCHMARKS:
                    errors.append(f"{where}: unknown benchmark {entry!r}")
                else:
                    oracles.append(OracleSpec(name=entry.lower()))
            elif isinstance(entry, dict) and "csv" in entry:
                try:
                    schema = TabularSchema.from_dict(entry.get("schema", {}))
                    oracles.append(OracleSpec(
                        name=str(entry.get("name", Path(entry["csv"]).stem)),
                        csv_path=str(entry["csv"]),
                        schema=schema,
                    ))
                except Exception as exc:
                    errors.append(f"{where}: {exc}")
            else:
                errors.append(f"{where}: expected benchmark id or csv mapping")

    strategies: List[Strategy] = []
    raw_strategies = raw.get("strategies")
    if not raw_strategies:
        errors.append("strategies: missing or empty")
    else:
        for k, d in enumerate(raw_strategies):
            s = _parse_strategy(d if isinstance(d, dict) else {"kind": d},
                                errors, f"strategies[{k}]")
            if s is not None:
                strategies.append(s)
        names = [s.name for s in strategies]
        if len(set(names)) != len(names):
            errors.append("strategies: duplicate strategy identities")

    def positive_int(key: str, default: int) -> int:
        v = raw.get(key, default)
        if not isinstance(v, int) or v < 1:
            errors.append(f"{key}: must be a positive integer")
            return default
        return v

    budget = positive_int("budget", 100)
    n_initial = positive_int("n_initial", 3)
    repetitions = positive_int("repetitions", 100)

    pool_raw = raw.get("pool", {}) or {}
    pool = PoolSpec(
        grid_1d=int(pool_raw.get("grid_1d", 1000)),
        grid_2d=int(pool_raw.get("grid_2d", 50)),
        lhs=int(pool_raw.get("lhs", 2000)),
    )
    if min(pool.grid_1d, pool.grid_2d, pool.lhs) < 2:
        errors.append("pool: sizes must be >= 2")

    mcmc_raw = raw.get("mcmc", {}) or {}
    nu = float(mcmc_raw.get("nu", 0.001))
    if nu <= 0:
        errors.append("mcmc.nu: must be positive")
    try:
        mcmc = McmcConfig(
            iterations=int(mcmc_raw.get("iterations", 1000)),
            burn_in=float(mcmc_raw.get("burn_in", 0.2)),
            inner_steps=int(mcmc_raw.get("inner", 5)),
        )
    except Exception as exc:
        errors.append(f"mcmc: {exc}")
        mcmc = McmcConfig()

    gpr_raw = raw.get("gpr", {}) or {}
    restarts = int(gpr_raw.get("restarts", 8))
    if restarts < 1:
        errors.append("gpr.restarts: must be >= 1")

    snr_db = float(raw.get("snr_db", 10.0))
    master_seed = int(raw.get("master_seed", 0))

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        oracles=tuple(oracles),
        strategies=tuple(strategies),
        budget=budget,
        n_initial=n_initial,
        repetitions=repetitions,
        pool=pool,
        snr_db=snr_db,
        mcmc=mcmc,
        nu=nu,
        optimizer_restarts=restarts,
        master_seed=master_seed,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw)


def validate_config(path) -> List[str]:
    """All diagnostics for a config file; empty means valid.

    Also dry-runs pool construction for each benchmark oracle.
    """
    try:
        config = load_config(path)
    except ConfigError as exc:
        return exc.diagnostics
    except Exception as exc:
        return [str(exc)]
    diags: List[str] = []
    for spec in config.oracles:
        if spec.is_tabular:
            if not Path(spec.csv_path).exists():
                diags.append(f"oracle {spec.name}: csv {spec.csv_path} not found")
        else:
            build_pool(get_benchmark(spec.name),
                       np.random.default_rng(0),
                       grid_1d=config.pool.grid_1d,
                       grid_2d=config.pool.grid_2d,
                       lhs_count=config.pool.lhs)
    return diags


def _crc(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def run_seed(master_seed: int, oracle_name: str, strategy_name: str,
             repetition: int) -> np.random.SeedSequence:
    """Seed derivation depends only on run identity, never list order."""
    return np.random.SeedSequence(
        [master_seed, _crc(oracle_name), _crc(strategy_name), repetition])


def pool_seed(master_seed: int, oracle_name: str) -> np.random.SeedSequence:
    """All runs on one oracle share one candidate grid."""
    return np.random.SeedSequence([master_seed, _crc(oracle_name), 0x9E3779B9])


def build_oracle(spec: OracleSpec, config: ExperimentConfig):
    if spec.is_tabular:
        table = load_csv(spec.csv_path, spec.schema)
        return TabularOracle(table.X, table.y)
    bench = get_benchmark(spec.name)
    rng = np.random.default_rng(pool_seed(config.master_seed, spec.name))
    grid = build_pool(bench, rng, grid_1d=config.pool.grid_1d,
                      grid_2d=config.pool.grid_2d, lhs_count=config.pool.lhs)
    return SyntheticOracle(bench, grid, snr_db=config.snr_db)


@dataclass
class RunResult:
    oracle: str
    strategy: str
    repetition: int
    records: List[RunRecord]
    chains: list
    error: Optional[str] = None


def _execute_run(args) -> RunResult:
    config, spec, strategy, repetition = args
    try:
        oracle = build_oracle(spec, config)
        settings = LoopSettings(
            n_initial=config.n_initial,
            budget=config.budget,
            optimizer_restarts=config.optimizer_restarts,
            mcmc=config.mcmc,
            nu=config.nu,
            bounds=config.bounds,
        )
        seed = run_seed(config.master_seed, spec.name, strategy.name,
                        repetition)
        collect = strategy.kind == "proposed" and repetition == 0
        records, chains = run_active_learning(
            oracle, strategy, settings, seed, collect_chains=collect)
        return RunResult(spec.name, strategy.name, repetition, records, chains)
    except Exception as exc:  # recorded, grid continues
        return RunResult(spec.name, strategy.name, repetition, [], [],
                         error=f"{type(exc).__name__}: {exc}")


def _format_point(point: np.ndarray) -> str:
    return ";".join(f"{v:.10g}" for v in np.atleast_1d(point))


def write_results(results: List[RunResult], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(results, key=lambda r: (r.oracle, r.strategy, r.repetition))
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for res in ordered:
            for rec in res.records:
                w.writerow([
                    res.strategy, res.oracle, res.repetition, rec.iteration,
                    f"{rec.rmse:.10g}",
                    "" if rec.eta_bar is None else f"{rec.eta_bar:.10g}",
                    rec.chosen_index, _format_point(rec.chosen_point),
                    f"{rec.wall_ms:.3f}",
                ])

    chains_dir = out_dir / "chains"
    for res in ordered:
        if not res.chains:
            continue
        chains_dir.mkdir(exist_ok=True)
        path = chains_dir / f"{res.oracle}__{res.strategy}__rep{res.repetition}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "sweep", "alpha", "beta", "eta",
                        "delta", "accepted"])
            for it, chain in enumerate(res.chains, start=1):
                for sweep, a, b, e, d, acc in chain.rows():
                    w.writerow([it, sweep, f"{a:.8g}", f"{b:.8g}",
                                f"{e:.8g}", f"{d:.8g}", int(acc)])


def improvement_pct(mean_other: float, mean_this: float) -> float:
    """Percentage RMSE improvement of `this` relative to `other`."""
    return 100.0 * (mean_other - mean_this) / mean_other


def write_summary(results: List[RunResult], out_dir: Path,
                  strategies: Sequence[Strategy]) -> None:
    """Per (oracle, strategy, iteration) RMSE stats plus the percentage
    improvement of the proposed strategy over each pure strategy."""
    by_key: Dict[Tuple[str, str, int], List[float]] = {}
    for res in results:
        for rec in res.records:
            by_key.setdefault((res.oracle, res.strategy, rec.iteration),
                              []).append(rec.rmse)

    pure_names = [s.name for s in strategies if s.kind in ("explore", "exploit")]
    header = ["oracle", "strategy", "iteration", "runs", "mean_rmse",
              "median_rmse", "q1_rmse", "q3_rmse"]
    header += [f"improvement_vs_{p}" for p in pure_names]

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (oracle, strategy, iteration) in sorted(by_key):
            vals = np.array(by_key[(oracle, strategy, iteration)])
            row = [oracle, strategy, iteration, len(vals),
                   f"{vals.mean():.10g}", f"{np.median(vals):.10g}",
                   f"{np.percentile(vals, 25):.10g}",
                   f"{np.percentile(vals, 75):.10g}"]
            for p in pure_names:
                if strategy == "proposed" and (oracle, p, iteration) in by_key:
                    other = float(np.mean(by_key[(oracle, p, iteration)]))
                    row.append(f"{improvement_pct(other, vals.mean()):.6g}")
                else:
                    row.append("")
            w.writerow(row)


def run_experiment(config: ExperimentConfig, out_dir, jobs: int = 1) -> int:
    """Execute the full grid; returns the process exit code (0 ok,
    1 partial grid)."""
    out_dir = Path(out_dir)
    tasks = [
        (config, spec, strategy, rep)
        for spec in config.oracles
        for strategy in config.strategies
        for rep in range(config.repetitions)
    ]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_execute_run, tasks)
    else:
        results = [_execute_run(t) for t in tasks]

    write_results(results, out_dir)
    write_summary(results, out_dir, config.strategies)

    failures = [r for r in results if r.error is not None]
    manifest = {
        "runs_total": len(results),
        "runs_failed": len(failures),
        "failures": [
            {"oracle": r.oracle, "strategy": r.strategy,
             "repetition": r.repetition, "error": r.error}
            for r in failures
        ],
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return 1 if failures else 0
