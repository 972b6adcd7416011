"""ID-vs-OOD evaluation: threshold calibration, FPR at a target TPR, AUROC.

Scores follow the higher-is-ID convention. An OOD score equal to the
threshold counts as a false positive.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInputError

DEFAULT_TPR = 0.95


def _scores(x, name):
    a = np.asarray(x, dtype=np.float64).ravel()
    if a.size == 0:
        raise InvalidInputError(f"{name} scores are empty")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} scores contain non-finite values")
    return a


@dataclass(frozen=True)
class ScoreSet:
    id_scores: np.ndarray = field(repr=False)
    ood_scores: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "id_scores", _scores(self.id_scores, "ID"))
        object.__setattr__(self, "ood_scores", _scores(self.ood_scores, "OOD"))

    def swapped(self):
        return ScoreSet(self.ood_scores, self.id_scores, self.label)


@dataclass(frozen=True)
class EvalReport:
    fpr95: float
    auroc: float
    gamma: float
    n_id: int
    n_ood: int

    def as_dict(self):
        return {"fpr95": self.fpr95, "auroc": self.auroc, "gamma": self.gamma,
                "n_id": self.n_id, "n_ood": self.n_ood}


def calibrate_gamma(id_scores, tpr=DEFAULT_TPR):
    """Threshold at the (1 - tpr) quantile of the ID scores (linear interpolation)."""
    if not 0 < tpr < 1:
        raise InvalidInputError("tpr must be in (0, 1)")
    s = _scores(id_scores, "ID")
    return float(np.quantile(s, 1.0 - tpr, method="linear"))


def fpr_at_tpr(s, tpr=DEFAULT_TPR):
    """Fraction of OOD scores at or above the calibrated threshold."""
    gamma = calibrate_gamma(s.id_scores, tpr)
    return float(np.mean(s.ood_scores >= gamma))


def auroc(s):
    """P(random ID score > random OOD score), ties counted one half."""
    n_id = s.id_scores.size
    n_ood = s.ood_scores.size
    ranks = rankdata(np.concatenate([s.id_scores, s.ood_scores]), method="average")
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def evaluate(s, tpr=DEFAULT_TPR):
    gamma = calibrate_gamma(s.id_scores, tpr)
    fpr = float(np.mean(s.ood_scores >= gamma))
    return EvalReport(fpr, auroc(s), gamma, int(s.id_scores.size), int(s.ood_scores.size))
