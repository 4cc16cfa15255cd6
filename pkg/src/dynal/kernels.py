"""Covariance kernels and Gram-matrix construction.

Everything downstream (the GP learner, the ten-member committee, and the
linear-dependence filter used by the trade-off sampler) goes through the
functions here.  A kernel is described declaratively by :class:`KernelSpec`
so that specs can be copied, perturbed during hyperparameter search, and
compared without touching any fitted state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

STATIONARY_FAMILIES = frozenset(
    {
        "squared_exponential",
        "exponential",
        "matern32",
        "matern52",
        "rational_quadratic",
    }
)
FAMILIES = STATIONARY_FAMILIES | {"dot_product", "product"}

#: Relative jitter added to square Gram diagonals before factorization.
BASE_JITTER = 1e-8
#: Jitter escalation cap; factorization past this raises.
MAX_JITTER = 1e-4


class KernelError(ValueError):
    """Invalid kernel configuration or incompatible inputs."""


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description.

    ``length_scale`` applies to the stationary families, ``constant`` to the
    dot-product kernel, ``rq_shape`` only to the rational quadratic.  A
    ``product`` spec multiplies its two ``factors`` pointwise; nesting deeper
    than one level is rejected since the committee only uses pairwise
    products.
    """

    family: str
    signal_variance: float = 1.0
    length_scale: float = 1.0
    rq_shape: float = 1.0
    constant: float = 1.0
    factors: Optional[Tuple["KernelSpec", "KernelSpec"]] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.family == "product":
            if self.factors is None or len(self.factors) != 2:
                raise KernelError("product kernel needs exactly two factors")
            for f in self.factors:
                if f.family == "product":
                    raise KernelError("product kernels cannot be nested")
        else:
            if self.factors is not None:
                raise KernelError("factors only valid for the product family")
            if self.signal_variance <= 0:
                raise KernelError("signal_variance must be positive")
            if self.family in STATIONARY_FAMILIES and self.length_scale <= 0:
                raise KernelError("length_scale must be positive")
            if self.family == "rational_quadratic" and self.rq_shape <= 0:
                raise KernelError("rq_shape must be positive")
            if self.family == "dot_product" and self.constant <= 0:
                raise KernelError("constant must be positive")

    @property
    def is_stationary(self) -> bool:
        if self.family == "product":
            return all(f.is_stationary for f in self.factors)
        return self.family in STATIONARY_FAMILIES

    def prior_variance(self, x: np.ndarray) -> float:
        """k(x, x) for a single point."""
        return float(eval_kernel(self, x, x))


@dataclass(frozen=True)
class GramMatrix:
    """Kernel matrix between two point lists, plus any diagonal jitter."""

    values: np.ndarray
    jitter_applied: float = 0.0


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise KernelError("points must form a 2-D array (n, d)")
    return X


def _check_dims(A: np.ndarray, B: np.ndarray):
    if A.shape[1] != B.shape[1]:
        raise KernelError(
            f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}"
        )


def _stationary_profile(spec: KernelSpec, dist: np.ndarray) -> np.ndarray:
    s2 = spec.signal_variance
    r = dist / spec.length_scale
    if spec.family == "squared_exponential":
        return s2 * np.exp(-0.5 * r * r)
    if spec.family == "exponential":
        return s2 * np.exp(-r)
    if spec.family == "matern32":
        t = np.sqrt(3.0) * r
        return s2 * (1.0 + t) * np.exp(-t)
    if spec.family == "matern52":
        t = np.sqrt(5.0) * r
        return s2 * (1.0 + t + t * t / 3.0) * np.exp(-t)
    if spec.family == "rational_quadratic":
        a = spec.rq_shape
        return s2 * (1.0 + r * r / (2.0 * a)) ** (-a)
    raise KernelError(f"{spec.family} is not stationary")


def kernel_matrix(spec: KernelSpec, dist: Optional[np.ndarray],
                  inner: Optional[np.ndarray]) -> np.ndarray:
    """Evaluate a kernel from cached pairwise statistics.

    ``dist`` holds Euclidean distances and ``inner`` holds inner products;
    either may be None when the spec does not need it.  Caching these lets
    the marginal-likelihood search re-evaluate kernels at many length
    scales without recomputing pairwise geometry.
    """
    if spec.family == "product":
        f1, f2 = spec.factors
        return kernel_matrix(f1, dist, inner) * kernel_matrix(f2, dist, inner)
    if spec.family == "dot_product":
        if inner is None:
            raise KernelError("dot_product kernel needs inner products")
        return spec.constant * inner
    if dist is None:
        raise KernelError("stationary kernel needs distances")
    return _stationary_profile(spec, dist)


def _needs_inner(spec: KernelSpec) -> bool:
    if spec.family == "product":
        return any(_needs_inner(f) for f in spec.factors)
    return spec.family == "dot_product"


def _needs_dist(spec: KernelSpec) -> bool:
    if spec.family == "product":
        return any(_needs_dist(f) for f in spec.factors)
    return spec.family in STATIONARY_FAMILIES


def cross_gram(spec: KernelSpec, A, B) -> np.ndarray:
    """Plain kernel matrix K(A, B), no diagonal terms added."""
    A, B = _as_points(A), _as_points(B)
    _check_dims(A, B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    dist = cdist(A, B) if _needs_dist(spec) else None
    inner = A @ B.T if _needs_inner(spec) else None
    return kernel_matrix(spec, dist, inner)


def eval_kernel(spec: KernelSpec, x, x2) -> float:
    """Kernel value k(x, x2) for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise KernelError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return float(cross_gram(spec, x[None, :], x2[None, :])[0, 0])


def _signal_scale(spec: KernelSpec) -> float:
    """Scale used to set the absolute jitter level."""
    if spec.family == "product":
        return _signal_scale(spec.factors[0]) * _signal_scale(spec.factors[1])
    if spec.family == "dot_product":
        return spec.constant
    return spec.signal_variance


def gram(spec: KernelSpec, A, B, noise_on_diagonal: float = 0.0) -> GramMatrix:
    """Kernel matrix; square case gets noise plus stabilization jitter.

    The jitter keeps Cholesky factorizations of near-singular matrices
    alive; its magnitude is recorded so callers can subtract it in audits.
    """
    A, B = _as_points(A), _as_points(B)
    if noise_on_diagonal < 0:
        raise KernelError("noise_on_diagonal must be nonnegative")
    K = cross_gram(spec, A, B)
    square = A.shape == B.shape and np.array_equal(A, B)
    jitter = BASE_JITTER * _signal_scale(spec) if square else 0.0
    if square:
        K = K + (noise_on_diagonal + jitter) * np.eye(A.shape[0])
    return GramMatrix(values=K, jitter_applied=jitter)


def cholesky_with_jitter(K: np.ndarray, scale: float = 1.0):
    """Lower Cholesky factor, escalating jitter x10 on failure.

    Returns ``(L, jitter_added)``.  ``K`` is assumed to already carry the
    base jitter from :func:`gram`; this only adds more when needed.
    """
    jitter = 0.0
    step = BASE_JITTER * scale
    for _ in range(11):
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(K.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = step if jitter == 0.0 else jitter * 10.0
            if jitter > MAX_JITTER * scale:
                break
    raise np.linalg.LinAlgError(
        "Cholesky factorization failed even after jitter escalation"
    )


# --- hyperparameter plumbing -------------------------------------------------
# The marginal-likelihood search treats a spec as a flat vector of free
# positive parameters searched in log space.

def free_parameters(spec: KernelSpec) -> list[tuple[str, ...]]:
    """Paths of the tunable parameters of a spec (length scales, dot
    constants, rational-quadratic shapes), in a stable order."""
    params: list[tuple[str, ...]] = []

    def visit(s: KernelSpec, prefix: tuple[str, ...]):
        if s.family == "product":
            visit(s.factors[0], prefix + ("0",))
            visit(s.factors[1], prefix + ("1",))
            return
        if s.family == "dot_product":
            params.append(prefix + ("constant",))
        else:
            params.append(prefix + ("length_scale",))
            if s.family == "rational_quadratic":
                params.append(prefix + ("rq_shape",))

    visit(spec, ())
    return params


def get_parameter(spec: KernelSpec, path: tuple[str, ...]) -> float:
    s = spec
    for p in path[:-1]:
        s = s.factors[int(p)]
    return getattr(s, path[-1])


def set_parameter(spec: KernelSpec, path: tuple[str, ...],
                  value: float) -> KernelSpec:
    if len(path) == 1:
        return replace(spec, **{path[0]: value})
    idx = int(path[0])
    factors = list(spec.factors)
    factors[idx] = set_parameter(factors[idx], path[1:], value)
    return replace(spec, factors=tuple(factors))
