"""Gaussian process regression with zero mean.

Hyperparameters (length scales and the noise variance) are fitted by
maximizing the log marginal likelihood with a derivative-free multi-start
coordinate search in log space.  The fitted model caches its Cholesky
factor and solved weight vector because prediction over the candidate pool
is the hot path of the active-learning loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist, pdist

from .kernels import (
    KernelSpec,
    cholesky_with_jitter,
    cross_gram,
    free_parameters,
    get_parameter,
    kernel_matrix,
    set_parameter,
    _needs_dist,
    _needs_inner,
    _signal_scale,
)

LOG_2PI = math.log(2.0 * math.pi)
LOG_2PIE = math.log(2.0 * math.pi * math.e)

#: Lower bound on the fitted noise variance.
NOISE_FLOOR = 1e-6


class GprInputError(ValueError):
    """Bad training or query data."""


@dataclass(frozen=True)
class GprConfig:
    """Fitting configuration.

    ``length_scale_bounds`` are multipliers applied to the median pairwise
    training distance.  ``noise_variance`` fixes the noise when given;
    otherwise it is fitted jointly with the kernel parameters, floored at
    ``NOISE_FLOOR`` (the data are noisy by construction, so zero would be
    wrong).
    """

    kernel: KernelSpec
    noise_variance: Optional[float] = None
    length_scale_bounds: Tuple[float, float] = (1e-2, 1e2)
    optimizer_restarts: int = 8

    def __post_init__(self):
        lo, hi = self.length_scale_bounds
        if not (0 < lo < hi):
            raise GprInputError("length_scale_bounds must satisfy 0 < lo < hi")
        if self.optimizer_restarts < 1:
            raise GprInputError("optimizer_restarts must be >= 1")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise GprInputError("noise_variance must be nonnegative")


@dataclass(frozen=True)
class GpPosterior:
    """Predictive distribution over a set of query points."""

    mean: np.ndarray
    covariance: np.ndarray
    training_size: int

    @property
    def variances(self) -> np.ndarray:
        """Diagonal of the predictive covariance, clamped at zero."""
        return np.maximum(np.diag(self.covariance), 0.0)


@dataclass(frozen=True)
class FittedGp:
    """Immutable fitted model; safe for concurrent prediction."""

    spec: KernelSpec
    noise_variance: float
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    log_marginal: float = float("nan")


def _as_training(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise GprInputError("X and y lengths differ")
    if X.shape[0] < 1:
        raise GprInputError("need at least one training point")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise GprInputError("training data must be finite")
    return X, y


def _log_marginal(K: np.ndarray, y: np.ndarray, scale: float) -> float:
    try:
        L, _ = cholesky_with_jitter(K, scale)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve((L, True), y, check_finite=False)
    n = y.shape[0]
    return float(
        -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI
    )


def condition(spec: KernelSpec, noise_variance: float, X, y,
              log_marginal: float = float("nan")) -> FittedGp:
    """Build a fitted model for frozen hyperparameters (no optimization)."""
    X, y = _as_training(X, y)
    K = cross_gram(spec, X, X)
    base = np.eye(len(y)) * noise_variance
    L, _ = cholesky_with_jitter(K + base, _signal_scale(spec))
    weights = cho_solve((L, True), y, check_finite=False)
    return FittedGp(
        spec=spec,
        noise_variance=noise_variance,
        X=X,
        y=y,
        chol=L,
        weights=weights,
        log_marginal=log_marginal,
    )


def median_pairwise_distance(X: np.ndarray) -> float:
    """Median nonzero pairwise distance; 1.0 when degenerate."""
    if X.shape[0] < 2:
        return 1.0
    d = pdist(X)
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def fit(config: GprConfig, X, y, rng: Optional[np.random.Generator] = None
        ) -> FittedGp:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Each restart starts from a random point inside the log-space bounds and
    runs two passes of bounded golden-section search over each parameter in
    turn.  Pairwise distances and inner products are computed once and
    shared across all likelihood evaluations.
    """
    X, y = _as_training(X, y)
    rng = rng if rng is not None else np.random.default_rng(0)
    spec = config.kernel

    dist = cdist(X, X) if _needs_dist(spec) else None
    inner = X @ X.T if _needs_inner(spec) else None
    eye = np.eye(len(y))

    med = median_pairwise_distance(X)
    param_paths = free_parameters(spec)
    bounds = []
    for path in param_paths:
        if path[-1] == "length_scale":
            bounds.append((math.log(config.length_scale_bounds[0] * med),
                           math.log(config.length_scale_bounds[1] * med)))
        elif path[-1] == "constant":
            bounds.append((math.log(1e-3), math.log(1e3)))
        else:  # rq_shape
            bounds.append((math.log(1e-1), math.log(1e1)))

    fit_noise = config.noise_variance is None
    if fit_noise:
        y_var = max(float(np.var(y)), 1e-2)
        bounds.append((math.log(NOISE_FLOOR), math.log(10.0 * y_var)))

    n_params = len(bounds)

    def build(theta) -> Tuple[KernelSpec, float]:
        s = spec
        for path, t in zip(param_paths, theta):
            s = set_parameter(s, path, math.exp(t))
        noise = (math.exp(theta[-1]) if fit_noise
                 else float(config.noise_variance))
        return s, noise

    def objective(theta) -> float:
        s, noise = build(theta)
        K = kernel_matrix(s, dist, inner) + noise * eye
        return -_log_marginal(K, y, _signal_scale(s))

    best_theta = None
    best_val = np.inf
    for restart in range(config.optimizer_restarts):
        if restart == 0:
            theta = np.array([0.5 * (lo + hi) for lo, hi in bounds])
        else:
            theta = np.array([rng.uniform(lo, hi) for lo, hi in bounds])
        val = objective(theta)
        for _ in range(2):
            for k in range(n_params):
                lo, hi = bounds[k]

                def line(t, k=k):
                    th = theta.copy()
                    th[k] = t
                    return objective(th)

                res = minimize_scalar(
                    line, bounds=(lo, hi), method="bounded",
                    options={"maxiter": 20, "xatol": 1e-3},
                )
                if res.fun < val:
                    theta[k] = res.x
                    val = res.fun
        if val < best_val:
            best_val = val
            best_theta = theta.copy()

    final_spec, final_noise = build(best_theta)
    return condition(final_spec, final_noise, X, y, log_marginal=-best_val)


def predict(model: FittedGp, X_u) -> GpPosterior:
    """Predictive mean and covariance at the query points."""
    X_u = np.asarray(X_u, dtype=float)
    if X_u.ndim == 1:
        X_u = X_u[:, None]
    if X_u.shape[0] == 0:
        raise GprInputError("query set is empty")
    if X_u.shape[1] != model.X.shape[1]:
        raise GprInputError("query dimension does not match training data")
    K_uo = cross_gram(model.spec, X_u, model.X)
    K_uu = cross_gram(model.spec, X_u, X_u)
    mean = K_uo @ model.weights
    V = solve_triangular(model.chol, K_uo.T, lower=True, check_finite=False)
    cov = K_uu - V.T @ V
    cov = 0.5 * (cov + cov.T)
    return GpPosterior(mean=mean, covariance=cov,
                       training_size=model.X.shape[0])


def predict_mean(model: FittedGp, X_u) -> np.ndarray:
    """Predictive mean only; skips the covariance solve."""
    X_u = np.asarray(X_u, dtype=float)
    if X_u.ndim == 1:
        X_u = X_u[:, None]
    K_uo = cross_gram(model.spec, X_u, model.X)
    return K_uo @ model.weights


def predict_variances(model: FittedGp, X_u) -> np.ndarray:
    """Per-point predictive variances without the full covariance."""
    X_u = np.asarray(X_u, dtype=float)
    if X_u.ndim == 1:
        X_u = X_u[:, None]
    K_uo = cross_gram(model.spec, X_u, model.X)
    prior = np.array([model.spec.prior_variance(x) for x in X_u]) \
        if not model.spec.is_stationary else \
        np.full(X_u.shape[0], _signal_scale(model.spec))
    V = solve_triangular(model.chol, K_uo.T, lower=True, check_finite=False)
    return np.maximum(prior - np.sum(V * V, axis=0), 0.0)


def posterior_entropy(post: GpPosterior) -> float:
    """Shannon entropy of the Gaussian predictive distribution.

    Returns -inf for a degenerate (zero-determinant) distribution.
    """
    cov = post.covariance
    d = cov.shape[0]
    if d == 1:
        v = max(float(cov[0, 0]), 0.0)
        if v == 0.0:
            return -np.inf
        return 0.5 * math.log(v) + 0.5 * LOG_2PIE
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        return -np.inf
    return 0.5 * logdet + 0.5 * d * LOG_2PIE
