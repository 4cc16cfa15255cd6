"""Simulated benchmark functions, SNR-calibrated noise, and RMSE.

Six test surfaces of increasing dimension (two 1-D, three 2-D, one 10-D)
serve as synthetic oracles.  Label noise is Gaussian with its variance
derived from a decibel signal-to-noise target, where signal power is the
variance of the noise-free function over the candidate grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.stats import qmc


class BenchmarkError(ValueError):
    """Unknown function id or out-of-domain input."""


def _f1(X: np.ndarray) -> np.ndarray:
    x = X[:, 0]
    low = 3.5 * np.exp(-((x - 10.0) ** 2) / 200.0)
    high = 8.0 - 3.5 * np.exp(-((x - 35.0) ** 2) / 200.0)
    return np.where(x <= 25.0, low, high)


def _f2(X: np.ndarray) -> np.ndarray:
    x = X[:, 0]
    return np.sin(x) + 2.0 * np.exp(-30.0 * x * x)


def _f3(X: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(X * np.sin(X) + 0.1 * X), axis=1)


def _f4(X: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    return (2.0 * x1 ** 2 - 1.05 * x1 ** 4 + x1 ** 6 / 6.0
            + x1 * x2 + x2 ** 2)


def _f5(X: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    return ((4.0 - 2.1 * x1 ** 2 + x1 ** 4 / 3.0) * x1 ** 2
            + x1 * x2 + (4.0 * x2 ** 4 - 4.0) * x2 ** 2)


def _f6(X: np.ndarray) -> np.ndarray:
    # Per-term grouping: sum_i (x_i^2 / 2 - cos(2 pi x_i)).
    return np.sum(0.5 * X * X - np.cos(2.0 * np.pi * X), axis=1)


@dataclass(frozen=True)
class BenchmarkFunction:
    id: str
    dimension: int
    domain: Tuple[Tuple[float, float], ...]
    _fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self._fn(X)


BENCHMARKS: Dict[str, BenchmarkFunction] = {
    "f1": BenchmarkFunction("f1", 1, ((0.0, 50.0),), _f1),
    "f2": BenchmarkFunction("f2", 1, ((-2.0, 2.0),), _f2),
    "f3": BenchmarkFunction("f3", 2, ((-5.0, 5.0),) * 2, _f3),
    "f4": BenchmarkFunction("f4", 2, ((-5.0, 5.0),) * 2, _f4),
    "f5": BenchmarkFunction("f5", 2, ((-2.0, 2.0),) * 2, _f5),
    "f6": BenchmarkFunction("f6", 10, ((-5.0, 5.0),) * 10, _f6),
}


def get_benchmark(name: str) -> BenchmarkFunction:
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise BenchmarkError(
            f"unknown benchmark {name!r}; expected one of {sorted(BENCHMARKS)}"
        ) from None


def _as_batch(bench: BenchmarkFunction, x) -> np.ndarray:
    """Accepts a scalar (1-D functions), a single point (d,), or a batch
    (n, d); returns a validated (n, d) array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        X = x.reshape(1, 1)
    elif x.ndim == 1:
        X = x[None, :]
    else:
        X = x
    if X.shape[1] != bench.dimension:
        raise BenchmarkError(
            f"{bench.id} expects dimension {bench.dimension}, got {X.shape[1]}"
        )
    for j, (lo, hi) in enumerate(bench.domain):
        if np.any(X[:, j] < lo) or np.any(X[:, j] > hi):
            raise BenchmarkError(f"{bench.id}: coordinate {j} out of domain")
    return X


def eval_true(bench: BenchmarkFunction, x) -> np.ndarray | float:
    """Noise-free function value(s); validates the domain."""
    x_arr = np.asarray(x, dtype=float)
    X = _as_batch(bench, x_arr)
    vals = bench(X)
    if x_arr.ndim <= 1 and vals.shape[0] == 1:
        return float(vals[0])
    return vals


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian label noise calibrated to a decibel SNR target."""

    snr_db: float = 10.0
    noise_variance: float = 0.0

    @staticmethod
    def from_signal_power(signal_power: float,
                          snr_db: float = 10.0) -> "NoiseModel":
        if signal_power < 0:
            raise BenchmarkError("signal power must be nonnegative")
        return NoiseModel(
            snr_db=snr_db,
            noise_variance=signal_power / 10.0 ** (snr_db / 10.0),
        )

    @staticmethod
    def for_grid(bench: BenchmarkFunction, grid: np.ndarray,
                 snr_db: float = 10.0) -> "NoiseModel":
        """Signal power taken as the variance of f over the candidate grid."""
        f = bench(np.atleast_2d(grid))
        return NoiseModel.from_signal_power(float(np.var(f)), snr_db)


def sample_label(bench: BenchmarkFunction, x, noise: NoiseModel,
                 rng: np.random.Generator) -> float:
    """Noisy observation y = f(x) + eps."""
    f = eval_true(bench, x)
    return float(f + rng.normal(0.0, math.sqrt(noise.noise_variance)))


def rmse(predicted, truth) -> float:
    """Root mean squared error between two equal-length vectors."""
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predicted.shape != truth.shape or predicted.size == 0:
        raise ValueError("predicted and truth must have equal nonzero length")
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def build_pool(bench: BenchmarkFunction, rng: np.random.Generator,
               grid_1d: int = 1000, grid_2d: int = 50,
               lhs_count: int = 2000) -> np.ndarray:
    """Finite candidate pool discretizing the search box.

    1-D functions get a dense regular grid, 2-D a regular lattice, and
    higher dimensions a Latin-hypercube sample.
    """
    lo = np.array([d[0] for d in bench.domain])
    hi = np.array([d[1] for d in bench.domain])
    if bench.dimension == 1:
        return np.linspace(lo[0], hi[0], grid_1d)[:, None]
    if bench.dimension == 2:
        g1 = np.linspace(lo[0], hi[0], grid_2d)
        g2 = np.linspace(lo[1], hi[1], grid_2d)
        a, b = np.meshgrid(g1, g2, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])
    sampler = qmc.LatinHypercube(d=bench.dimension, seed=rng)
    unit = sampler.random(lhs_count)
    return qmc.scale(unit, lo, hi)
