"""Sequential active-learning loop and the query strategies it drives.

One run: seed an initial labeled set from the candidate pool, then
repeatedly fit the learner, pick the next candidate according to the
strategy, query its label, and record the model error against the
noise-free truth grid.  The proposed strategy estimates the trade-off
weight afresh each iteration with the hierarchical sampler; the baselines
use fixed, scheduled, or degenerate weights.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import acquisition as acq
from .benchmarks import BenchmarkFunction, NoiseModel, rmse
from .gpr import FittedGp, GprConfig, fit, predict_mean, predict_variances
from .kernels import KernelSpec
from .tradeoff import (
    AldConfig,
    AldEvaluator,
    HyperPriorBounds,
    McmcConfig,
    TradeOffChain,
    initial_state,
    run_chain,
)

EXPLORE_KINDS = ("igs", "maxvar", "maxent")
STRATEGY_KINDS = ("proposed", "explore", "exploit", "static",
                  "probabilistic", "random")


class LoopError(ValueError):
    """Invalid strategy or loop configuration."""


@dataclass(frozen=True)
class Strategy:
    """Query-selection rule for one run.

    ``explore_kind`` names the exploration score used by the proposed,
    static, probabilistic, and pure-exploration strategies; exploitation
    is always committee disagreement.
    """

    kind: str
    explore_kind: str = "igs"
    eta: Optional[float] = None
    decay: float = 0.7

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise LoopError(f"unknown strategy kind {self.kind!r}")
        if self.explore_kind not in EXPLORE_KINDS:
            raise LoopError(f"unknown explore_kind {self.explore_kind!r}")
        if self.kind == "static":
            if self.eta is None or not (0.0 <= self.eta <= 1.0):
                raise LoopError("static strategy needs eta in [0, 1]")
        if self.kind == "probabilistic" and not (0.0 < self.decay < 1.0):
            raise LoopError("probabilistic decay must lie in (0, 1)")

    @property
    def name(self) -> str:
        if self.kind == "explore":
            return self.explore_kind
        if self.kind == "exploit":
            return "qbc"
        if self.kind == "static":
            return f"static-{self.eta:g}"
        if self.kind == "probabilistic":
            return f"prob-{self.decay:g}"
        return self.kind

    @property
    def needs_committee(self) -> bool:
        return self.kind in ("proposed", "exploit", "static", "probabilistic")


@dataclass
class Dataset:
    """Labeled pairs plus the remaining unlabeled candidates."""

    labeled_X: np.ndarray
    labeled_y: np.ndarray
    pool: np.ndarray
    pool_indices: np.ndarray

    def move_to_labeled(self, pool_pos: int, label: float) -> int:
        """Labels the candidate at pool position; returns its grid index."""
        grid_index = int(self.pool_indices[pool_pos])
        x = self.pool[pool_pos]
        self.labeled_X = np.vstack([self.labeled_X, x[None, :]])
        self.labeled_y = np.append(self.labeled_y, label)
        keep = np.ones(len(self.pool), dtype=bool)
        keep[pool_pos] = False
        self.pool = self.pool[keep]
        self.pool_indices = self.pool_indices[keep]
        return grid_index


class SyntheticOracle:
    """Noisy labels from a benchmark function over a fixed grid."""

    def __init__(self, bench: BenchmarkFunction, grid: np.ndarray,
                 snr_db: float = 10.0):
        self.bench = bench
        self.grid = np.atleast_2d(np.asarray(grid, dtype=float))
        self.truth = bench(self.grid)
        self.noise = NoiseModel.for_grid(bench, self.grid, snr_db)
        self._noise_std = float(np.sqrt(self.noise.noise_variance))

    def label(self, grid_index: int, rng: np.random.Generator) -> float:
        return float(self.truth[grid_index] + rng.normal(0.0, self._noise_std))


class TabularOracle:
    """Stored labels for a finite table of rows; each row queried once."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.grid = np.atleast_2d(np.asarray(X, dtype=float))
        self.truth = np.asarray(y, dtype=float).ravel()
        if len(self.grid) != len(self.truth):
            raise LoopError("X and y row counts differ")

    def label(self, grid_index: int, rng: np.random.Generator) -> float:
        return float(self.truth[grid_index])


@dataclass(frozen=True)
class LoopSettings:
    n_initial: int = 3
    budget: int = 100
    optimizer_restarts: int = 8
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    nu: float = 0.001
    bounds: HyperPriorBounds = field(default_factory=HyperPriorBounds)
    learner_kernel: KernelSpec = field(
        default_factory=lambda: KernelSpec("matern32"))

    def __post_init__(self):
        if self.n_initial < 1 or self.budget < 1:
            raise LoopError("n_initial and budget must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    iteration: int
    chosen_index: int
    chosen_point: np.ndarray
    eta_bar: Optional[float]
    rmse: float
    wall_ms: float


def _explore_scores(kind: str, learner: FittedGp,
                    data: Dataset) -> np.ndarray:
    if kind == "igs":
        return acq.score_igs(learner, data.labeled_X, data.labeled_y,
                             data.pool)
    if kind == "maxvar":
        return predict_variances(learner, data.pool)
    return acq.score_maxent(learner, data.pool)


def probabilistic_explores(decay: float, t: int,
                           rng: np.random.Generator) -> bool:
    """Annealing schedule: explore with probability decay**(t-1)."""
    return rng.uniform() <= decay ** (t - 1)


def select_next(strategy: Strategy, learner: FittedGp, data: Dataset,
                committee: Optional[acq.Committee], settings: LoopSettings,
                t: int, rng: np.random.Generator,
                ) -> Tuple[int, Optional[float], Optional[TradeOffChain]]:
    """Pick the next pool position; returns (pool_pos, eta_bar, chain)."""
    if len(data.pool) == 0:
        raise LoopError("candidate pool is empty")

    if strategy.kind == "random":
        return int(np.argmax(acq.score_random(data.pool, rng))), None, None

    if strategy.kind == "exploit":
        return int(np.argmax(acq.score_qbc(committee, data.pool))), None, None

    if strategy.kind == "explore":
        scores = _explore_scores(strategy.explore_kind, learner, data)
        return int(np.argmax(scores)), None, None

    if strategy.kind == "probabilistic":
        if probabilistic_explores(strategy.decay, t, rng):
            scores = _explore_scores(strategy.explore_kind, learner, data)
        else:
            scores = acq.score_qbc(committee, data.pool)
        return int(np.argmax(scores)), None, None

    explore_raw = _explore_scores(strategy.explore_kind, learner, data)
    exploit_raw = acq.score_qbc(committee, data.pool)

    if strategy.kind == "static":
        scored = acq.combine(explore_raw, exploit_raw, strategy.eta)
        combined = np.array([s.combined for s in scored])
        return int(np.argmax(combined)), strategy.eta, None

    # proposed: estimate eta_bar with the hierarchical sampler
    e_norm = acq.minmax_normalize(explore_raw)
    x_norm = acq.minmax_normalize(exploit_raw)

    def scorer(eta: float) -> Tuple[int, np.ndarray]:
        j = acq.combined_argmax(e_norm, x_norm, eta)
        return j, data.pool[j]

    ald = AldEvaluator(AldConfig(kernel=learner.spec, nu=settings.nu),
                       data.labeled_X)
    eta_bar, chain = run_chain(
        initial_state(settings.bounds, rng), settings.mcmc, settings.bounds,
        scorer, ald, rng,
    )
    pool_pos = acq.combined_argmax(e_norm, x_norm, eta_bar)
    return pool_pos, eta_bar, chain


def run_active_learning(oracle, strategy: Strategy, settings: LoopSettings,
                        seed, collect_chains: bool = False,
                        ) -> Tuple[List[RunRecord], List[TradeOffChain]]:
    """Execute one full run; returns per-iteration records (and chains).

    The error at iteration t is the RMSE of the learner refit on the
    labeled set after the t-th query, evaluated against the noise-free
    truth over the full candidate grid.  Stops early (cleanly) if the pool
    empties before the budget is spent.
    """
    rng = np.random.default_rng(seed)
    grid = oracle.grid
    n = len(grid)
    if settings.n_initial >= n:
        raise LoopError("n_initial must leave at least one pool candidate")

    init = rng.choice(n, size=settings.n_initial, replace=False)
    init_mask = np.zeros(n, dtype=bool)
    init_mask[init] = True
    data = Dataset(
        labeled_X=grid[init],
        labeled_y=np.array([oracle.label(int(i), rng) for i in init]),
        pool=grid[~init_mask],
        pool_indices=np.flatnonzero(~init_mask),
    )

    gpr_cfg = GprConfig(kernel=settings.learner_kernel,
                        optimizer_restarts=settings.optimizer_restarts)
    learner = fit(gpr_cfg, data.labeled_X, data.labeled_y, rng)

    records: List[RunRecord] = []
    chains: List[TradeOffChain] = []
    for t in range(1, settings.budget + 1):
        if len(data.pool) == 0:
            break
        start = time.perf_counter()
        committee = (
            acq.fit_committee(data.labeled_X, data.labeled_y, grid)
            if strategy.needs_committee else None
        )
        pool_pos, eta_bar, chain = select_next(
            strategy, learner, data, committee, settings, t, rng)
        x_star = data.pool[pool_pos].copy()
        label = oracle.label(int(data.pool_indices[pool_pos]), rng)
        grid_index = data.move_to_labeled(pool_pos, label)

        learner = fit(gpr_cfg, data.labeled_X, data.labeled_y, rng)
        err = rmse(predict_mean(learner, grid), oracle.truth)
        wall_ms = (time.perf_counter() - start) * 1000.0

        records.append(RunRecord(
            iteration=t,
            chosen_index=grid_index,
            chosen_point=x_star,
            eta_bar=eta_bar,
            rmse=err,
            wall_ms=wall_ms,
        ))
        if collect_chains and chain is not None:
            chains.append(chain)
    return records, chains
