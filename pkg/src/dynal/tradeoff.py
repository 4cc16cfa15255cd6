"""Hierarchical Metropolis-within-Gibbs sampler for the trade-off weight.

The trade-off weight eta follows a Beta(alpha, beta) prior whose shape
parameters carry a uniform hyperprior on [a, b].  Each sweep updates
alpha, beta, and eta in turn with single-parameter Metropolis moves.  The
eta update has no tractable likelihood, so acceptance is gated ABC-style:
the candidate point nominated by the proposed eta must be sufficiently
linearly independent (in kernel feature space) from the training inputs,
as measured by the approximate-linear-dependence residual delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve

from .kernels import KernelSpec, cholesky_with_jitter, cross_gram, _signal_scale


@dataclass(frozen=True)
class HyperPriorBounds:
    """Support of the uniform hyperprior on the Beta shape parameters."""

    a: float = 0.1
    b: float = 5.0

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise ValueError("need 0 < a < b")


@dataclass(frozen=True)
class AldConfig:
    """Kernel and threshold for the linear-dependence gate."""

    kernel: KernelSpec
    nu: float = 0.001

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 1000
    burn_in: float = 0.2
    inner_steps: int = 5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0.0 <= self.burn_in < 1.0):
            raise ValueError("burn_in fraction must lie in [0, 1)")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")


@dataclass
class ChainState:
    """Current position of the sampler."""

    alpha: float
    beta: float
    eta: float


@dataclass
class TradeOffChain:
    """Recorded history of a finished run, one row per sweep."""

    alpha: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    delta: np.ndarray
    accepted: np.ndarray
    burn_in: int = 0

    def __len__(self) -> int:
        return len(self.eta)

    def rows(self):
        """(sweep, alpha, beta, eta, delta, accepted) tuples for export."""
        for s in range(len(self.eta)):
            yield (s, float(self.alpha[s]), float(self.beta[s]),
                   float(self.eta[s]), float(self.delta[s]),
                   bool(self.accepted[s]))


def beta_log_density(eta: float, alpha: float, beta: float) -> float:
    """Log Beta(alpha, beta) density at eta; -inf at the endpoints."""
    if eta <= 0.0 or eta >= 1.0:
        return -math.inf
    return (
        (alpha - 1.0) * math.log(eta)
        + (beta - 1.0) * math.log1p(-eta)
        - (math.lgamma(alpha) + math.lgamma(beta) - math.lgamma(alpha + beta))
    )


def adaptive_tau2(center: float, support: Tuple[float, float]) -> float:
    """Proposal variance keeping center +/- 3 tau inside the support.

    Floored so the proposal never degenerates at the boundary.
    """
    lo, hi = support
    tau = min(center - lo, hi - center) / 3.0
    return max(tau * tau, 1e-6)


class AldEvaluator:
    """Linear-dependence residuals against a fixed training set.

    Factorizes K(X_o, X_o) once; per-candidate residuals are memoized by
    index because the sampler revisits the same nominated candidates many
    times per sweep.
    """

    def __init__(self, config: AldConfig, X_o):
        self.config = config
        X_o = np.asarray(X_o, dtype=float)
        if X_o.ndim == 1:
            X_o = X_o[:, None]
        if X_o.shape[0] == 0:
            raise ValueError("training set is empty")
        self.X_o = X_o
        # No unconditional jitter: the residual must match the exact
        # least-squares minimum; jitter only enters if factorization fails.
        K = cross_gram(config.kernel, X_o, X_o)
        self._chol, _ = cholesky_with_jitter(K, _signal_scale(config.kernel))
        self._cache: dict[int, float] = {}

    def distance(self, x_hat) -> Tuple[float, np.ndarray]:
        """(delta, coefficient vector) for one candidate point."""
        x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
        k_vec = cross_gram(self.config.kernel, self.X_o, x_hat[None, :])[:, 0]
        a_star = cho_solve((self._chol, True), k_vec, check_finite=False)
        k_xx = self.config.kernel.prior_variance(x_hat)
        delta = max(k_xx - float(k_vec @ a_star), 0.0)
        return delta, a_star

    def distance_by_index(self, index: int, x_hat) -> float:
        d = self._cache.get(index)
        if d is None:
            d, _ = self.distance(x_hat)
            self._cache[index] = d
        return d


def ald_distance(config: AldConfig, X_o, x_hat) -> Tuple[float, np.ndarray]:
    """One-shot linear-dependence residual of a candidate point."""
    return AldEvaluator(config, X_o).distance(x_hat)


def _metropolis_shape_step(value: float, density_at_eta: Callable[[float], float],
                           bounds: HyperPriorBounds,
                           rng: np.random.Generator) -> float:
    """Shared Metropolis move for the Beta shape parameters.

    The uniform hyperprior cancels in the ratio; out-of-support proposals
    carry zero prior mass and are rejected outright.
    """
    tau2 = adaptive_tau2(value, (bounds.a, bounds.b))
    proposal = rng.normal(value, math.sqrt(tau2))
    if proposal < bounds.a or proposal > bounds.b:
        return value
    log_r = density_at_eta(proposal) - density_at_eta(value)
    if log_r >= 0.0 or math.log(rng.random()) < log_r:
        return proposal
    return value


def gibbs_step_alpha(state: ChainState, bounds: HyperPriorBounds,
                     rng: np.random.Generator) -> float:
    """One Metropolis update of alpha given (beta, eta)."""
    state.alpha = _metropolis_shape_step(
        state.alpha,
        lambda a: beta_log_density(state.eta, a, state.beta),
        bounds, rng,
    )
    return state.alpha


def gibbs_step_beta(state: ChainState, bounds: HyperPriorBounds,
                    rng: np.random.Generator) -> float:
    """One Metropolis update of beta given the already-updated alpha."""
    state.beta = _metropolis_shape_step(
        state.beta,
        lambda b: beta_log_density(state.eta, state.alpha, b),
        bounds, rng,
    )
    return state.beta


def gibbs_step_eta(state: ChainState,
                   scorer: Callable[[float], Tuple[int, np.ndarray]],
                   ald: AldEvaluator,
                   rng: np.random.Generator) -> Tuple[float, float, bool]:
    """One ABC-gated Metropolis update of eta.

    ``scorer`` maps an eta value to the (index, point) of the candidate it
    would nominate from the pool.  The proposal only enters the Metropolis
    accept/reject when that candidate's residual clears the threshold;
    otherwise eta stays put regardless of the prior ratio.

    Returns ``(eta_new, delta, accepted)`` with delta = nan when the
    proposal fell outside [0, 1] and no candidate was nominated.
    """
    tau2 = adaptive_tau2(state.eta, (0.0, 1.0))
    proposal = rng.normal(state.eta, math.sqrt(tau2))
    if proposal < 0.0 or proposal > 1.0:
        return state.eta, math.nan, False
    index, point = scorer(proposal)
    delta = ald.distance_by_index(index, point)
    if delta < ald.config.nu:
        return state.eta, delta, False
    log_r = (beta_log_density(proposal, state.alpha, state.beta)
             - beta_log_density(state.eta, state.alpha, state.beta))
    if log_r >= 0.0 or math.log(rng.random()) < log_r:
        state.eta = proposal
        return proposal, delta, True
    return state.eta, delta, False


def run_chain(initial: Tuple[float, float, float],
              mcmc: McmcConfig,
              bounds: HyperPriorBounds,
              scorer: Callable[[float], Tuple[int, np.ndarray]],
              ald: AldEvaluator,
              rng: np.random.Generator) -> Tuple[float, TradeOffChain]:
    """Run the full sampler and average the post-burn-in eta samples.

    Each sweep performs ``inner_steps`` Metropolis repetitions per
    parameter, cycling alpha, beta, eta.  The recorded delta/accepted per
    sweep come from the last eta repetition of that sweep.
    """
    state = ChainState(*initial)
    if not (bounds.a <= state.alpha <= bounds.b):
        raise ValueError("alpha0 outside hyperprior support")
    if not (bounds.a <= state.beta <= bounds.b):
        raise ValueError("beta0 outside hyperprior support")
    if not (0.0 <= state.eta <= 1.0):
        raise ValueError("eta0 outside [0, 1]")

    n = mcmc.iterations
    alpha_h = np.empty(n)
    beta_h = np.empty(n)
    eta_h = np.empty(n)
    delta_h = np.full(n, math.nan)
    acc_h = np.zeros(n, dtype=bool)

    for s in range(n):
        for _ in range(mcmc.inner_steps):
            gibbs_step_alpha(state, bounds, rng)
        for _ in range(mcmc.inner_steps):
            gibbs_step_beta(state, bounds, rng)
        # Record the last accepted eta move of the sweep (that is the move
        # the end-of-sweep eta comes from), else the last attempted one.
        delta = math.nan
        accepted = False
        for _ in range(mcmc.inner_steps):
            _, d, acc = gibbs_step_eta(state, scorer, ald, rng)
            if acc or not accepted:
                delta = d
                accepted = acc
        alpha_h[s] = state.alpha
        beta_h[s] = state.beta
        eta_h[s] = state.eta
        delta_h[s] = delta
        acc_h[s] = accepted

    burn = int(mcmc.burn_in * n)
    if burn >= n:
        burn = n - 1
    eta_bar = float(np.mean(eta_h[burn:]))
    chain = TradeOffChain(alpha=alpha_h, beta=beta_h, eta=eta_h,
                          delta=delta_h, accepted=acc_h, burn_in=burn)
    return eta_bar, chain


def initial_state(bounds: HyperPriorBounds,
                  rng: np.random.Generator) -> Tuple[float, float, float]:
    """Draw (alpha0, beta0, eta0) from the priors."""
    return (
        float(rng.uniform(bounds.a, bounds.b)),
        float(rng.uniform(bounds.a, bounds.b)),
        float(rng.uniform(0.0, 1.0)),
    )
