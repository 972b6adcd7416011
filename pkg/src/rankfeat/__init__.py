"""Rank-1 removal OOD scoring: spectral kernels, scores, bounds and diagnostics."""
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InvalidInputError,
    NpyFormatError,
    RankFeatError,
)
from .linalg import (
    BACKEND,
    PowerIterationResult,
    SingularTriplet,
    dominant_triplet,
    power_iteration,
    singular_values,
    subtract_rank1,
    subtract_rank_n,
    svd,
)
from .pipeline import ClassifierHead, FeatureMatrix, LinearLayer, forward_head, forward_layer
from .scoring import (
    FusionStrategy,
    OdinConfig,
    ReActConfig,
    calibrate_react_tau,
    energy_score,
    fuse_logits,
    msp_score,
    odin_score,
    rankfeat_rankweight_score,
    rankfeat_score,
    rankweight_prune,
    rankweight_score,
    react_score,
)
from .evalkit import EvalReport, ScoreSet, auroc, evaluate, fpr_at_tpr
from .npyio import read_npy, write_npy

__version__ = "0.1.0"
