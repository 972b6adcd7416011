"""Toy inference pipeline: linear layer -> feature map -> GAP -> linear head."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import as_matrix


@dataclass(frozen=True)
class FeatureMatrix:
    """A C x (H*W) feature map with its spatial size.

    ``post_activation`` marks ReLU-output semantics: every entry must then
    be nonnegative.
    """

    mat: np.ndarray = field(repr=False)
    height: int
    width: int
    post_activation: bool = False

    def __post_init__(self):
        mat = as_matrix(self.mat, "feature matrix")
        if self.height < 1 or self.width < 1:
            raise InvalidInputError("height and width must be positive")
        if mat.shape[1] != self.height * self.width:
            raise InvalidInputError(
                f"feature has {mat.shape[1]} columns, expected H*W = {self.height * self.width}"
            )
        if self.post_activation and np.any(mat < 0):
            raise InvalidInputError("post-activation feature has negative entries")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_array(cls, mat, height=None, width=None, post_activation=False):
        """Wrap a 2-D array; spatial size defaults to (H*W, 1)."""
        mat = as_matrix(mat, "feature matrix")
        if height is None and width is None:
            height, width = mat.shape[1], 1
        elif height is None:
            height = mat.shape[1] // width
        elif width is None:
            width = mat.shape[1] // height
        return cls(mat, int(height), int(width), post_activation)

    @property
    def channels(self):
        return self.mat.shape[0]

    @property
    def spatial(self):
        return self.height * self.width

    def with_mat(self, mat, post_activation=None):
        if post_activation is None:
            post_activation = self.post_activation and bool(np.all(np.asarray(mat) >= 0))
        return FeatureMatrix(mat, self.height, self.width, post_activation)


@dataclass(frozen=True)
class ClassifierHead:
    """Final linear map ``y = W p + b`` producing Q >= 2 logits."""

    weight: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = as_matrix(self.weight, "head weight")
        b = np.asarray(self.bias, dtype=np.float64).ravel()
        if w.shape[0] < 2:
            raise InvalidInputError("a classifier head needs at least two classes")
        if b.shape[0] != w.shape[0]:
            raise InvalidInputError(f"bias length {b.shape[0]} does not match {w.shape[0]} classes")
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("head bias contains non-finite entries")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self):
        return self.weight.shape[0]

    @property
    def in_features(self):
        return self.weight.shape[1]


@dataclass(frozen=True)
class LinearLayer:
    """Parameter matrix M mapping C_prev channels to C channels."""

    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mat", as_matrix(self.mat, "layer matrix"))


def gap_vector(height, width):
    """Global-average-pooling vector: H*W entries, each 1/(H*W)."""
    n = height * width
    if n < 1:
        raise InvalidInputError("H*W must be >= 1")
    return np.full(n, 1.0 / n)


def pooled(x):
    """Pooled feature vector ``X m``."""
    return x.mat @ gap_vector(x.height, x.width)


def head_logits(p, head):
    """Logits ``W p + b`` for an already pooled vector ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (head.in_features,):
        raise InvalidInputError(
            f"pooled vector has shape {p.shape}, head expects ({head.in_features},)"
        )
    return head.weight @ p + head.bias


def forward_head(x, head):
    """Logits of feature ``x`` through GAP and the head."""
    if head.in_features != x.channels:
        raise InvalidInputError(
            f"head expects {head.in_features} channels, feature has {x.channels}"
        )
    return head_logits(pooled(x), head)


def forward_layer(prev, layer):
    """Apply ``M`` to a feature map; spatial size is preserved."""
    if layer.mat.shape[1] != prev.channels:
        raise InvalidInputError(
            f"layer expects {layer.mat.shape[1]} input channels, feature has {prev.channels}"
        )
    return FeatureMatrix(layer.mat @ prev.mat, prev.height, prev.width)
