"""Post-hoc OOD score functions. Higher scores mean more in-distribution."""
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .linalg import SingularTriplet, dominant_triplet, power_iteration, subtract_rank1, svd
from .pipeline import LinearLayer, forward_head, forward_layer, head_logits, pooled

DEFAULT_ODIN_TEMPERATURE = 1000.0
DEFAULT_REACT_PERCENTILE = 90.0


@dataclass(frozen=True)
class OdinConfig:
    temperature: float = DEFAULT_ODIN_TEMPERATURE

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidInputError("ODIN temperature must be > 0")


@dataclass(frozen=True)
class ReActConfig:
    """Clipping threshold for pooled activations; ``inf`` disables clipping."""

    tau: float = math.inf

    def __post_init__(self):
        if not self.tau >= 0:
            raise InvalidInputError("ReAct tau must be >= 0")


class FusionStrategy(enum.Enum):
    MEAN = "mean"
    SCORE_MEAN = "score-mean"
    FEATURE_MEAN = "feature-mean"


def _logit_vector(y):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise InvalidInputError("logsumexp of an empty vector")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("logits contain non-finite values")
    return y


def logsumexp(values):
    """``log(sum(exp(values)))`` shifted by the maximum so it never overflows."""
    v = _logit_vector(values)
    top = float(v.max())
    return top + math.log(float(np.exp(v - top).sum()))


def energy_score(y):
    return logsumexp(y)


def msp_score(y):
    """Largest softmax probability."""
    v = _logit_vector(y)
    return math.exp(float(v.max()) - logsumexp(v))


def odin_score(y, cfg=OdinConfig()):
    """Temperature-scaled MSP without input perturbation."""
    return msp_score(_logit_vector(y) / cfg.temperature)


def react_transform(x, cfg):
    """Pooled vector clipped elementwise at ``cfg.tau``."""
    if x.post_activation and np.any(x.mat < 0):
        raise InvalidInputError("post-activation feature has negative entries")
    return np.minimum(pooled(x), cfg.tau)


def react_score(x, head, cfg):
    return energy_score(head_logits(react_transform(x, cfg), head))


def calibrate_react_tau(id_features, percentile=DEFAULT_REACT_PERCENTILE):
    """Threshold at the given percentile of all pooled ID activations.

    Uses linear interpolation between order statistics.
    """
    feats = list(id_features)
    if not feats:
        raise InvalidInputError("cannot calibrate ReAct on an empty collection")
    if not 0 < percentile <= 100:
        raise InvalidInputError("percentile must be in (0, 100]")
    acts = np.concatenate([pooled(f) for f in feats])
    return ReActConfig(float(np.percentile(acts, percentile, method="linear")))


class RankFeatResult(NamedTuple):
    score: float
    logits: np.ndarray
    triplet: SingularTriplet
    degenerate: bool


def feature_triplet(mat, pi_iters=0, pi_tol=1e-10):
    """Dominant triplet by exact SVD (``pi_iters == 0``) or by power iteration.

    Returns ``(triplet, degenerate)``.
    """
    if not np.any(mat):
        raise DegenerateInputError("rank-1 removal on an all-zero feature")
    if pi_iters:
        res = power_iteration(mat, max_iters=pi_iters, tol=pi_tol)
        return res.triplet, res.degenerate
    u, s, v = svd(mat)
    tied = s.shape[0] > 1 and s[0] - s[1] <= 1e-12 * s[0]
    return SingularTriplet(float(s[0]), u[:, 0].copy(), v[:, 0].copy()), bool(tied)


def rankfeat_score(x, head, pi_iters=0, pi_tol=1e-10):
    """Energy of the logits after removing the dominant rank-1 component of ``x``.

    ``pi_iters == 0`` uses the exact SVD; otherwise up to ``pi_iters`` power
    iterations. A tie between the top two singular values sets
    ``degenerate``; one dominant direction is removed regardless.
    """
    trip, degenerate = feature_triplet(x.mat, pi_iters, pi_tol)
    reduced = x.with_mat(subtract_rank1(x.mat, trip), post_activation=False)
    logits = forward_head(reduced, head)
    return RankFeatResult(energy_score(logits), logits, trip, degenerate)


def rankweight_prune(layer):
    """Layer with its dominant rank-1 component removed; compute once, reuse."""
    if not np.any(layer.mat):
        raise DegenerateInputError("cannot prune an all-zero layer")
    return LinearLayer(subtract_rank1(layer.mat, dominant_triplet(layer.mat)))


def rankweight_score(prev, layer, head, pruned=None):
    """Energy score with the pruned layer. Pass ``pruned`` to skip the SVD."""
    if pruned is None:
        pruned = rankweight_prune(layer)
    return energy_score(forward_head(forward_layer(prev, pruned), head))


def rankfeat_rankweight_score(prev, layer, head, pi_iters=0, pruned=None):
    """RankFeat applied to the feature produced by the pruned layer."""
    if pruned is None:
        pruned = rankweight_prune(layer)
    return rankfeat_score(forward_layer(prev, pruned), head, pi_iters).score


def fuse_logits(y_a, y_b, strategy=FusionStrategy.MEAN):
    """Energy of the mean of two logit vectors."""
    strategy = FusionStrategy(strategy)
    if strategy is not FusionStrategy.MEAN:
        raise NotImplementedError(f"fusion strategy {strategy.value!r} is not implemented")
    a = _logit_vector(y_a)
    b = _logit_vector(y_b)
    if a.shape != b.shape:
        raise InvalidInputError(f"cannot fuse logits of lengths {a.size} and {b.size}")
    return logsumexp(0.5 * (a + b))


def map_ordered(fn, items, jobs=1):
    """``[fn(i) for i in items]`` optionally on a thread pool; order is preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


__all__ = [
    "OdinConfig",
    "ReActConfig",
    "FusionStrategy",
    "RankFeatResult",
    "logsumexp",
    "energy_score",
    "msp_score",
    "odin_score",
    "react_transform",
    "react_score",
    "calibrate_react_tau",
    "feature_triplet",
    "rankfeat_score",
    "rankweight_prune",
    "rankweight_score",
    "rankfeat_rankweight_score",
    "fuse_logits",
    "map_ordered",
]
