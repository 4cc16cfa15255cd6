"""Pool-scoring acquisition strategies and their weighted combination.

Five pure strategies are provided: improved greedy sampling (exploration),
query-by-committee disagreement (exploitation), maximum predictive
variance, maximum predictive entropy, and uniform random.  ``combine``
min-max normalizes an exploration and an exploitation score vector and
mixes them with the trade-off weight eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .gpr import (
    FittedGp,
    GpPosterior,
    LOG_2PIE,
    condition,
    median_pairwise_distance,
    predict_mean,
    predict_variances,
)
from .kernels import KernelSpec, free_parameters, set_parameter


class AcquisitionError(ValueError):
    """Invalid acquisition inputs (empty pools, mismatched lengths...)."""


#: Committee members keep fixed hyperparameters: every length scale is
#: set to the median pairwise distance of the candidate pool (a stable
#: property of the search-space geometry) and the noise variance to this
#: fraction of the label variance.  Disagreement then reflects how
#: differently the kernel families extrapolate between observations.
#: Per-member likelihood optimization instead lets each member explain
#: surprising labels as noise or as a shrunken length scale, collapsing
#: exactly the disagreement that query-by-committee exploits at
#: discontinuities and change points; deriving the scale from the labeled
#: inputs would shrink it as queries cluster, locking the committee into
#: the cluster.
COMMITTEE_NUGGET_FRACTION = 0.02


@dataclass(frozen=True)
class AcquisitionScore:
    candidate_index: int
    exploration_score: float
    exploitation_score: float
    combined: float


@dataclass(frozen=True)
class Committee:
    """Fitted GP ensemble; all members share one training set."""

    members: tuple

    def __post_init__(self):
        if len(self.members) < 2:
            raise AcquisitionError("committee needs at least 2 members")


def committee_kernel_specs() -> List[KernelSpec]:
    """The ten-kernel committee: five base kernels, the scaled dot product,
    and four pairwise products of the smooth and rough base kernels."""
    se = KernelSpec("squared_exponential")
    ex = KernelSpec("exponential")
    m32 = KernelSpec("matern32")
    m52 = KernelSpec("matern52")
    rq = KernelSpec("rational_quadratic")
    dot = KernelSpec("dot_product")
    prod = lambda a, b: KernelSpec("product", factors=(a, b))
    return [se, ex, m32, m52, rq, dot,
            prod(se, m32), prod(se, m52), prod(ex, m32), prod(ex, m52)]


def fit_committee(X, y, pool=None) -> Committee:
    """Condition all committee members on the same labeled data.

    Members use the fixed hyperparameter convention described at
    :data:`COMMITTEE_NUGGET_FRACTION`; no per-member optimization.  The
    shared length scale comes from ``pool`` when given (subsampled for
    large pools), falling back to the labeled inputs.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    scale_points = X if pool is None else _pool(pool)
    if len(scale_points) > 256:
        stride = len(scale_points) // 256 + 1
        scale_points = scale_points[::stride]
    med = median_pairwise_distance(scale_points)
    nugget = max(COMMITTEE_NUGGET_FRACTION * float(np.var(y)), 1e-6)
    members = []
    for spec in committee_kernel_specs():
        for path in free_parameters(spec):
            if path[-1] == "length_scale":
                spec = set_parameter(spec, path, med)
        members.append(condition(spec, nugget, X, y))
    return Committee(members=tuple(members))


def _pool(pool) -> np.ndarray:
    pool = np.asarray(pool, dtype=float)
    if pool.ndim == 1:
        pool = pool[:, None]
    if pool.shape[0] == 0:
        raise AcquisitionError("candidate pool is empty")
    return pool


def score_igs(model: FittedGp, labeled_X, labeled_y, pool) -> np.ndarray:
    """Improved greedy sampling: per candidate, the minimum over training
    points of (input distance) * (predicted-output distance).

    The min is taken jointly over the product, not separately per factor.
    """
    pool = _pool(pool)
    X = np.asarray(labeled_X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labeled_y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise AcquisitionError("iGS needs a nonempty labeled set")
    f_hat = predict_mean(model, pool)
    du = cdist(pool, X)
    dv = np.abs(f_hat[:, None] - y[None, :])
    return np.min(du * dv, axis=1)


def committee_means(committee: Committee, pool) -> np.ndarray:
    """(Q, m) matrix of member predictive means over the pool."""
    pool = _pool(pool)
    return np.stack([predict_mean(m, pool) for m in committee.members])


def score_qbc(committee: Committee, pool) -> np.ndarray:
    """Maximum pairwise disagreement of committee means, per candidate.

    The max over pairs |h_l - h_p| collapses to max minus min.
    """
    means = committee_means(committee, pool)
    return means.max(axis=0) - means.min(axis=0)


def score_maxvar(post: GpPosterior) -> np.ndarray:
    """Predictive variances over the pool, clamped at zero."""
    return post.variances


def score_maxent(model: FittedGp, pool) -> np.ndarray:
    """Pointwise Gaussian entropy of the predictive distribution.

    Zero-variance candidates score -inf and are never selected.
    """
    v = predict_variances(model, pool)
    out = np.full(v.shape, -np.inf)
    pos = v > 0
    out[pos] = 0.5 * np.log(v[pos]) + 0.5 * LOG_2PIE
    return out


def score_random(pool, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform scores; the argmax is a uniform draw."""
    pool = _pool(pool)
    return rng.random(pool.shape[0])


def minmax_normalize(scores) -> np.ndarray:
    """Map scores to [0, 1] over the pool.

    Constant vectors normalize to all-0.5 so neither term dominates the
    combination.  -inf sentinels map to 0 and never win.
    """
    scores = np.asarray(scores, dtype=float)
    out = np.zeros_like(scores)
    finite = np.isfinite(scores)
    if not finite.any():
        return np.full_like(scores, 0.5)
    lo = scores[finite].min()
    hi = scores[finite].max()
    if hi - lo < 1e-300:
        out[finite] = 0.5
    else:
        out[finite] = (scores[finite] - lo) / (hi - lo)
    return out


def combine(explore: Sequence[float], exploit: Sequence[float],
            eta: float) -> List[AcquisitionScore]:
    """Min-max normalize both score vectors and mix them with weight eta.

    The eta=1 / eta=0 endpoints preserve the pure strategies' argmax since
    min-max normalization is monotone.
    """
    explore = np.asarray(explore, dtype=float)
    exploit = np.asarray(exploit, dtype=float)
    if explore.shape != exploit.shape:
        raise AcquisitionError("score vectors must have equal length")
    if not (0.0 <= eta <= 1.0):
        raise AcquisitionError("eta must lie in [0, 1]")
    e1 = minmax_normalize(explore)
    e2 = minmax_normalize(exploit)
    c = eta * e1 + (1.0 - eta) * e2
    return [
        AcquisitionScore(
            candidate_index=j,
            exploration_score=float(e1[j]),
            exploitation_score=float(e2[j]),
            combined=float(c[j]),
        )
        for j in range(len(c))
    ]


def combined_argmax(explore_norm: np.ndarray, exploit_norm: np.ndarray,
                    eta: float) -> int:
    """Argmax of the eta-combination of already-normalized score vectors.

    Hot path for the trade-off sampler; np.argmax breaks ties by lowest
    index, matching :func:`combine`.
    """
    return int(np.argmax(eta * explore_norm + (1.0 - eta) * exploit_norm))
