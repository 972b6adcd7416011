"""Seeded synthetic features with a spiked spectrum, plus random heads and layers.

Random streams come from the Philox-4x64 counter-based generator; Gaussian
draws use the Box-Muller transform on its uniform doubles so the
construction can be replayed outside numpy. Per-sample seeds partition the
seed space as ``seed + stride * index + lane``.
"""
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .evalkit import ScoreSet
from .linalg import dominant_triplet, singular_values
from .pipeline import ClassifierHead, FeatureMatrix, LinearLayer, forward_head, forward_layer
from . import scoring

METHODS = ("msp", "odin", "energy", "react", "rankfeat", "rankweight", "rankfeat+rankweight")
LAYER_METHODS = ("rankweight", "rankfeat+rankweight")


def uniform_stream(seed):
    """Philox-4x64 generator seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def gaussian(gen, size):
    """Standard normal draws by Box-Muller from ``gen``'s uniform doubles."""
    size = int(size)
    pairs = (size + 1) // 2
    u = gen.random(2 * pairs)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = rad * np.cos(2.0 * math.pi * u2)
    z[1::2] = rad * np.sin(2.0 * math.pi * u2)
    return z[:size]


def _positive_direction(gen, n):
    d = np.abs(gaussian(gen, n))
    return d / np.linalg.norm(d)


@dataclass(frozen=True)
class SynthConfig:
    channels: int
    height: int
    width: int
    spike: float = 0.0
    bulk_scale: float = 1.0
    seed: int = 0
    nonnegative: bool = False
    pathway_spike: float = 0.0

    def __post_init__(self):
        if min(self.channels, self.height, self.width) < 1:
            raise InvalidInputError("channels, height and width must be positive")
        if not self.spike >= 0 or not self.pathway_spike >= 0:
            raise InvalidInputError("spike and pathway_spike must be >= 0")
        if not self.bulk_scale > 0:
            raise InvalidInputError("bulk_scale must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")

    @property
    def spatial(self):
        return self.height * self.width

    def bulk_edge(self):
        """Expected top singular value of the noise bulk."""
        return self.bulk_scale * (math.sqrt(self.channels) + math.sqrt(self.spatial))

    def as_dict(self):
        return dataclasses.asdict(self)


def gen_feature(cfg, pathway=None):
    """Spiked feature ``spike * edge * u v^T + G``.

    ``u`` and ``v`` are random unit vectors in the positive orthant
    (spatially coherent activation) and ``G`` has i.i.d. entries of scale
    ``bulk_scale``. When a unit ``pathway`` direction is given (a layer's
    dominant input direction) a second term
    ``pathway_spike * edge * pathway w^T`` is added with its own positive
    ``w``. With ``nonnegative`` the result is clamped at zero and flagged
    post-activation.
    """
    gen = uniform_stream(cfg.seed)
    u = _positive_direction(gen, cfg.channels)
    v = _positive_direction(gen, cfg.spatial)
    w = _positive_direction(gen, cfg.spatial)
    bulk = cfg.bulk_scale * gaussian(gen, cfg.channels * cfg.spatial).reshape(cfg.channels, cfg.spatial)
    x = cfg.spike * cfg.bulk_edge() * np.outer(u, v) + bulk
    if pathway is not None and cfg.pathway_spike:
        p = np.asarray(pathway, dtype=np.float64)
        if p.shape != (cfg.channels,):
            raise InvalidInputError("pathway direction must have one entry per channel")
        x += cfg.pathway_spike * cfg.bulk_edge() * np.outer(p / np.linalg.norm(p), w)
    if cfg.nonnegative:
        np.maximum(x, 0.0, out=x)
    return FeatureMatrix(x, cfg.height, cfg.width, post_activation=cfg.nonnegative)


def gen_head(num_classes, channels, seed):
    """Head with i.i.d. zero-mean weight and bias entries of scale 1/sqrt(C)."""
    if num_classes < 2:
        raise InvalidInputError("a head needs at least two classes")
    gen = uniform_stream(seed)
    scale = 1.0 / math.sqrt(channels)
    w = scale * gaussian(gen, num_classes * channels).reshape(num_classes, channels)
    b = scale * gaussian(gen, num_classes)
    return ClassifierHead(w, b)


def gen_layer(out_channels, in_channels, seed, spike=0.0):
    """Layer ``G / sqrt(C_in) + spike * (1 + sqrt(C_out / C_in)) * a c^T``.

    ``a`` and ``c`` are positive-orthant unit vectors; the prefactor is the
    bulk edge of the Gaussian part, so ``spike`` is relative to it.
    """
    gen = uniform_stream(seed)
    g = gaussian(gen, out_channels * in_channels).reshape(out_channels, in_channels)
    m = g / math.sqrt(in_channels)
    if spike:
        a = _positive_direction(gen, out_channels)
        c = _positive_direction(gen, in_channels)
        m = m + spike * (1.0 + math.sqrt(out_channels / in_channels)) * np.outer(a, c)
    return LinearLayer(m)


def spike_ratio(x):
    """sigma_1 / sigma_2 of a feature (inf when sigma_2 is zero)."""
    s = singular_values(x.mat if isinstance(x, FeatureMatrix) else x)
    if s.shape[0] < 2 or s[1] == 0:
        return math.inf
    return float(s[0] / s[1])


def sample_seed(base, index, lane, stride=3):
    return int(base) + stride * int(index) + int(lane)


@dataclass
class Benchmark:
    score_sets: dict
    manifest: dict


def gen_benchmark(id_cfg, ood_cfg, n_per_side, head, seed=0, methods=METHODS,
                  layer=None, pi_iters=0,
                  odin_temperature=scoring.DEFAULT_ODIN_TEMPERATURE,
                  react_percentile=scoring.DEFAULT_REACT_PERCENTILE, jobs=1):
    """Score ``n_per_side`` ID and OOD samples with every requested method.

    Sample ``i`` draws with seed ``seed + 3i`` (ID), ``seed + 3i + 1`` (OOD)
    and ``seed + 3i + 2`` (held-out ID set for ReAct calibration); each
    config's own ``seed`` is replaced. With ``layer`` the generated samples
    are pre-layer features and every method scores ``M X`` (pruned for the
    RankWeight methods) and a config's ``pathway_spike`` is placed along the
    layer's dominant input direction.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InvalidInputError(f"unknown methods {sorted(unknown)}")
    if layer is None and any(m in LAYER_METHODS for m in methods):
        raise InvalidInputError("RankWeight methods need a layer")

    pruned = scoring.rankweight_prune(layer) if layer is not None else None
    pathway = dominant_triplet(layer.mat).v if layer is not None else None

    def make(cfg, i, lane):
        c = dataclasses.replace(cfg, seed=sample_seed(seed, i, lane))
        return gen_feature(c, pathway)

    def lift(prev, m):
        return forward_layer(prev, m) if m is not None else prev

    id_prev = [make(id_cfg, i, 0) for i in range(n_per_side)]
    ood_prev = [make(ood_cfg, i, 1) for i in range(n_per_side)]

    react_cfg = None
    if "react" in methods:
        cal = [lift(make(id_cfg, i, 2), layer) for i in range(n_per_side)]
        react_cfg = scoring.calibrate_react_tau(cal, react_percentile)
    odin_cfg = scoring.OdinConfig(odin_temperature)

    def score_one(prev):
        out = {}
        feat = lift(prev, layer)
        logits = None
        if {"msp", "odin", "energy"} & set(methods):
            logits = forward_head(feat, head)
        for m in methods:
            if m == "msp":
                out[m] = scoring.msp_score(logits)
            elif m == "odin":
                out[m] = scoring.odin_score(logits, odin_cfg)
            elif m == "energy":
                out[m] = scoring.energy_score(logits)
            elif m == "react":
                out[m] = scoring.react_score(feat, head, react_cfg)
            elif m == "rankfeat":
                out[m] = scoring.rankfeat_score(feat, head, pi_iters).score
            elif m == "rankweight":
                out[m] = scoring.rankweight_score(prev, layer, head, pruned=pruned)
            else:
                out[m] = scoring.rankfeat_rankweight_score(prev, layer, head, pi_iters, pruned=pruned)
        return out

    id_rows = scoring.map_ordered(score_one, id_prev, jobs)
    ood_rows = scoring.map_ordered(score_one, ood_prev, jobs)
    sets = {
        m: ScoreSet([r[m] for r in id_rows], [r[m] for r in ood_rows], m) for m in methods
    } if n_per_side else {}
    manifest = {
        "id_config": id_cfg.as_dict(),
        "ood_config": ood_cfg.as_dict(),
        "n_per_side": n_per_side,
        "seed": seed,
        "seed_scheme": "seed + 3*i + lane (0 id, 1 ood, 2 react calibration)",
        "methods": list(methods),
        "pi_iters": pi_iters,
        "layer": layer is not None,
        "odin_temperature": odin_temperature,
        "react_percentile": react_percentile,
        "react_tau": None if react_cfg is None else react_cfg.tau,
    }
    return Benchmark(sets, manifest)
