import math

import numpy as np
import pytest

from rankfeat import bounds, linalg, scoring
from rankfeat.errors import DegenerateInputError, InvalidInputError
from rankfeat.pipeline import ClassifierHead, FeatureMatrix, LinearLayer


def rand_head(q, c, rng):
    return ClassifierHead(rng.standard_normal((q, c)) / math.sqrt(c), rng.standard_normal(q) / math.sqrt(c))


def test_weight_inf_norm():
    assert bounds.weight_inf_norm(np.array([[1.0, -2.0], [0.5, 0.5]])) == 3.0


def test_zero_feature():
    rng = np.random.default_rng(0)
    head = rand_head(5, 4, rng)
    x = FeatureMatrix(np.zeros((4, 6)), 2, 3)
    c = float(np.abs(head.bias).max()) + math.log(5)
    e = bounds.energy_bound(x, head)
    r = bounds.rankfeat_bound(x, head)
    assert e.bound == pytest.approx(c) and r.bound == pytest.approx(c)
    assert r.score == pytest.approx(scoring.logsumexp(head.bias))
    assert r.slack >= 0


def test_rank1_feature_has_no_spectral_term():
    rng = np.random.default_rng(1)
    head = rand_head(4, 6, rng)
    x = FeatureMatrix(np.outer(np.abs(rng.standard_normal(6)), np.ones(8)), 2, 4)
    r = bounds.rankfeat_bound(x, head)
    assert r.bound == pytest.approx(float(np.abs(head.bias).max()) + math.log(4), abs=1e-10)
    assert r.slack >= -1e-12


def test_difference_identity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        c = int(rng.integers(2, 30))
        x = FeatureMatrix(rng.standard_normal((c, 12)), 3, 4)
        head = rand_head(3, c, rng)
        e = bounds.energy_bound(x, head)
        r = bounds.rankfeat_bound(x, head)
        s1 = linalg.singular_values(x.mat)[0]
        assert abs(r.bound - (e.bound - s1 * bounds.weight_inf_norm(head.weight) / 12)) <= 1e-10


@pytest.mark.parametrize("nonneg", [False, True])
def test_slack_on_declared_families(nonneg):
    rng = np.random.default_rng(3 + nonneg)
    for _ in range(200):
        c = int(rng.integers(16, 65))
        h, w = (int(v) for v in rng.integers(1, 15, 2))
        mat = rng.standard_normal((c, h * w)) * rng.uniform(0.1, 3)
        if nonneg:
            mat = np.maximum(mat, 0)
        x = FeatureMatrix(mat, h, w)
        head = rand_head(int(rng.integers(2, 20)), c, rng)
        assert bounds.energy_bound(x, head).slack >= -1e-9
        if np.any(mat):
            assert bounds.rankfeat_bound(x, head).slack >= -1e-9
        if nonneg:
            tau = float(np.percentile(mat.mean(axis=1), 90))
            assert bounds.react_bound(x, head, scoring.ReActConfig(tau)).slack >= -1e-9


def test_energy_bound_counterexample():
    # the bound is not universal: a constant feature with aligned head rows
    # pools to a vector the spectral term undercounts by sqrt(HW)
    x = FeatureMatrix(np.ones((2, 20)), 4, 5)
    head = ClassifierHead(np.array([[10.0, 10.0], [-10.0, -10.0]]), np.zeros(2))
    rep = bounds.energy_bound(x, head)
    assert rep.score == pytest.approx(20.0, abs=1e-9)
    assert rep.bound == pytest.approx(math.sqrt(40) / 20 * 20 + math.log(2))
    assert rep.slack < 0


def test_react_bound():
    rng = np.random.default_rng(5)
    head = rand_head(6, 10, rng)
    x = FeatureMatrix(np.abs(rng.standard_normal((10, 9))), 3, 3)
    s1 = linalg.singular_values(x.mat)[0]
    big = bounds.react_bound(x, head, scoring.ReActConfig(s1 / math.sqrt(90) + 1.0))
    assert big.bound == pytest.approx(bounds.energy_bound(x, head).bound, abs=1e-12)
    zero = bounds.react_bound(x, head, scoring.ReActConfig(0.0))
    assert zero.score == pytest.approx(scoring.logsumexp(head.bias))
    assert zero.slack >= 0
    with pytest.raises(InvalidInputError):
        bounds.react_bound(FeatureMatrix(-np.ones((10, 9)), 3, 3), head, scoring.ReActConfig(1.0))


def test_rankweight_tighten():
    u = np.array([0.6, 0.8])
    assert bounds.rankweight_tighten(LinearLayer(np.outer(u, u))) == pytest.approx(0.0, abs=1e-12)
    assert bounds.rankweight_tighten(LinearLayer(3 * np.eye(4))) == pytest.approx(1.0)
    assert bounds.rankweight_tighten(LinearLayer(np.ones((1, 3)))) == 0.0
    m = np.random.default_rng(6).standard_normal((7, 5))
    s = np.linalg.svd(m, compute_uv=False)
    r = bounds.rankweight_tighten(LinearLayer(m))
    assert 0 <= r <= 1 and abs(r - s[1] / s[0]) <= 1e-10
    with pytest.raises(DegenerateInputError):
        bounds.rankweight_tighten(LinearLayer(np.zeros((2, 2))))


def test_rankweight_bound():
    rng = np.random.default_rng(7)
    for _ in range(50):
        c = int(rng.integers(16, 40))
        prev = FeatureMatrix(rng.standard_normal((c, 20)), 4, 5)
        layer = LinearLayer(rng.standard_normal((c, c)) / math.sqrt(c))
        head = rand_head(5, c, rng)
        rep = bounds.rankweight_bound(prev, layer, head)
        assert rep.slack >= -1e-9
        assert rep.bound <= rep.components["unscaled_bound"] + 1e-12
    with pytest.raises(DegenerateInputError):
        bounds.rankweight_bound(prev, LinearLayer(np.zeros((c, c))), head)


def test_report_dict():
    rep = bounds.BoundReport(2.0, 1.5, {"logQ": 0.7})
    assert rep.as_dict() == {"bound": 2.0, "score": 1.5, "slack": 0.5, "logQ": 0.7}
