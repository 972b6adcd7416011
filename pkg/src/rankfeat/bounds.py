"""Closed-form upper bounds on energy-family scores.

All bounds share the shape ``(sum of singular values) * ||W||_inf / HW +
||b||_inf + log Q``, where ``||W||_inf`` is the induced infinity norm (max
absolute row sum) and ``||b||_inf`` the max absolute entry. They are
diagnostics only and never gate scoring.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .linalg import singular_values
from .pipeline import forward_head
from .scoring import energy_score, rankfeat_score, rankweight_score, react_score


@dataclass(frozen=True)
class BoundReport:
    bound: float
    score: float
    components: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.bound - self.score

    def as_dict(self):
        return {"bound": self.bound, "score": self.score, "slack": self.slack, **self.components}


def weight_inf_norm(w):
    """Induced infinity norm: the largest absolute row sum."""
    return float(np.abs(w).sum(axis=1).max())


def _constants(head):
    binf = float(np.abs(head.bias).max())
    logq = math.log(head.num_classes)
    return binf, logq


def _spectral_parts(x):
    s = singular_values(x.mat)
    return float(s.sum()), float(s[0])


def energy_bound(x, head):
    """Bound on the plain Energy score of ``x``: ``sum(s) ||W||_inf / HW + C``."""
    total, s1 = _spectral_parts(x)
    winf = weight_inf_norm(head.weight)
    binf, logq = _constants(head)
    hw = x.spatial
    bound = total / hw * winf + binf + logq
    score = energy_score(forward_head(x, head))
    return BoundReport(bound, score, {
        "spectral_sum": total, "s1_term": s1 / hw * winf,
        "weight_inf_norm": winf, "bias_inf_norm": binf, "logQ": logq,
    })


def rankfeat_bound(x, head):
    """Bound on the RankFeat score: the energy bound minus ``s1 ||W||_inf / HW``."""
    total, s1 = _spectral_parts(x)
    winf = weight_inf_norm(head.weight)
    binf, logq = _constants(head)
    hw = x.spatial
    s1_term = s1 / hw * winf
    bound = (total / hw * winf - s1_term) + binf + logq
    if np.any(x.mat):
        score = rankfeat_score(x, head).score
    else:
        score = energy_score(head.bias)
    return BoundReport(bound, score, {
        "spectral_sum": total, "s1_term": s1_term,
        "weight_inf_norm": winf, "bias_inf_norm": binf, "logQ": logq,
    })


def react_bound(x, head, cfg):
    """Bound on the ReAct score; requires a nonnegative feature.

    The clipping credit is ``max(s1 / sqrt(C HW) - tau, 0) ||W||_inf / HW``.
    """
    if np.any(x.mat < 0):
        raise InvalidInputError("ReAct bound requires a nonnegative feature")
    total, s1 = _spectral_parts(x)
    winf = weight_inf_norm(head.weight)
    binf, logq = _constants(head)
    hw = x.spatial
    clip = max(s1 / math.sqrt(x.channels * hw) - cfg.tau, 0.0)
    bound = total / hw * winf - clip / hw * winf + binf + logq
    score = react_score(x, head, cfg)
    return BoundReport(bound, score, {
        "spectral_sum": total, "s1_term": clip / hw * winf,
        "weight_inf_norm": winf, "bias_inf_norm": binf, "logQ": logq,
    })


def rankweight_tighten(layer):
    """Ratio of the second to the first singular value of the layer matrix."""
    s = singular_values(layer.mat)
    if s[0] == 0.0:
        raise DegenerateInputError("layer matrix is zero")
    s2 = float(s[1]) if s.shape[0] > 1 else 0.0
    return s2 / float(s[0])


def rankweight_bound(prev, layer, head):
    """RankWeight bound: the pre-layer energy-style bound scaled by ``s2/s1`` of M.

    ``(s2/s1) * sum_i s1 sigma_i(X_prev) ||W||_inf / HW + C``.
    """
    sm = singular_values(layer.mat)
    if sm[0] == 0.0:
        raise DegenerateInputError("layer matrix is zero")
    ratio = rankweight_tighten(layer)
    sp = singular_values(prev.mat)
    winf = weight_inf_norm(head.weight)
    binf, logq = _constants(head)
    hw = prev.spatial
    unscaled = float(sm[0]) * float(sp.sum()) / hw * winf
    bound = ratio * unscaled + binf + logq
    score = rankweight_score(prev, layer, head)
    return BoundReport(bound, score, {
        "spectral_sum": float(sm[0]) * float(sp.sum()), "s1_term": 0.0,
        "weight_inf_norm": winf, "bias_inf_norm": binf, "logQ": logq,
        "tighten_ratio": ratio, "unscaled_bound": unscaled + binf + logq,
    })
