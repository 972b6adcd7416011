import math

import numpy as np
import pytest
from scipy import integrate

from rankfeat import diagnostics as dg
from rankfeat import linalg, synth
from rankfeat.errors import DegenerateInputError, InvalidInputError

from oracles import mp_inverse_cdf_sample, mp_mass, mp_pdf


def test_sample_covariance_eigs():
    assert np.allclose(dg.sample_covariance_eigs(np.eye(5)), 0.2)
    q = np.linalg.qr(np.random.default_rng(0).standard_normal((9, 9)))[0]
    rows = q[:4] * 3.0  # orthogonal rows of norm sqrt(cols)
    assert np.allclose(dg.sample_covariance_eigs(rows), 1.0)
    x = np.random.default_rng(1).standard_normal((6, 11))
    s = np.linalg.svd(x, compute_uv=False)
    assert np.allclose(dg.sample_covariance_eigs(x), s ** 2 / 11, atol=1e-8)
    tall = dg.sample_covariance_eigs(np.random.default_rng(2).standard_normal((7, 3)))
    assert tall.shape == (7,) and np.all(tall[3:] == 0)


def test_mp_edges_at_square_ratio():
    fit = dg.MPFit(1.0, 100, 100)
    assert (fit.lambda_minus, fit.lambda_plus) == (0.0, 4.0)


def test_mp_density_outside_support():
    fit = dg.MPFit(1.0, 200, 100)
    assert dg.mp_density(fit.lambda_minus / 2, fit) == 0.0
    assert dg.mp_density(fit.lambda_plus * 1.01, fit) == 0.0
    assert dg.mp_density(0.0, dg.MPFit(1.0, 10, 10)) == 0.0
    vals = dg.mp_density(np.array([-1.0, 1.0, 10.0]), fit)
    assert vals[0] == 0 and vals[1] > 0 and vals[2] == 0
    assert dg.mp_density(1.0, fit) == pytest.approx(mp_pdf(1.0, 1.0, 200, 100))


@pytest.mark.parametrize("t,n", [(100, 100), (300, 100), (100, 300), (196, 64), (64, 196)])
@pytest.mark.parametrize("sigma2", [0.5, 1.0, 3.0])
def test_mp_mass_by_quadrature(t, n, sigma2):
    fit = dg.MPFit(sigma2, t, n)
    got, _ = integrate.quad(dg.mp_density, fit.lambda_minus, fit.lambda_plus, args=(fit,), limit=200)
    assert got == pytest.approx(min(1.0, t / n), abs=1e-4)
    assert fit.mass == pytest.approx(mp_mass(sigma2, t, n), abs=1e-6)


def test_bin_masses_match_quadrature():
    fit = dg.MPFit(1.3, 196, 64)
    edges = np.linspace(0, fit.lambda_plus * 1.1, 31)
    got = dg.mp_bin_masses(edges, fit)
    ref = [integrate.quad(mp_pdf, a, b, args=(1.3, 196, 64), limit=200)[0] for a, b in zip(edges, edges[1:])]
    assert np.allclose(got, ref, atol=1e-9)
    square = dg.MPFit(1.0, 50, 50)
    edges = np.linspace(0, 4, 9)
    ref = [integrate.quad(mp_pdf, a, b, args=(1.0, 50, 50), limit=200)[0] for a, b in zip(edges, edges[1:])]
    assert np.allclose(dg.mp_bin_masses(edges, square), ref, atol=1e-7)


def test_fit_mp():
    x = np.random.default_rng(3).standard_normal((256, 256))
    fit = dg.fit_mp(dg.sample_covariance_eigs(x), 256, 256)
    assert fit.sigma2 == pytest.approx(1.0, rel=0.1)
    assert dg.fit_mp(np.full(5, 2.5), 10, 5).sigma2 == 2.5
    e = np.random.default_rng(4).uniform(0.1, 2, 20)
    a, b = dg.fit_mp(e, 40, 20), dg.fit_mp(2 * e, 40, 20)
    assert b.sigma2 == 2 * a.sigma2
    assert b.lambda_minus == 2 * a.lambda_minus and b.lambda_plus == 2 * a.lambda_plus
    with pytest.raises(DegenerateInputError):
        dg.fit_mp(np.zeros(4), 4, 4)
    with pytest.raises(InvalidInputError):
        dg.fit_mp([], 4, 4)
    with pytest.raises(InvalidInputError):
        dg.MPFit(0.0, 4, 4)


@pytest.mark.parametrize("t,n", [(196, 64), (100, 100)])
def test_kl_small_for_exact_mp_samples(t, n):
    fit = dg.MPFit(1.0, t, n)
    eigs = mp_inverse_cdf_sample(1.0, t, n, 100_000, np.random.default_rng(5))
    assert dg.kl_to_mp(eigs, fit).kl < 0.05


def test_kl_large_for_disjoint_support():
    fit = dg.MPFit(1.0, 196, 64)
    rep = dg.kl_to_mp(np.full(64, 100.0), fit)
    assert rep.kl > 0.5 * math.log(1 / rep.epsilon)


def test_kl_drops_point_mass():
    fit = dg.MPFit(1.0, 64, 196)  # continuous part carries mass 64/196
    eigs = np.concatenate([np.zeros(132), mp_inverse_cdf_sample(1.0, 64, 196, 64, np.random.default_rng(6))])
    rep = dg.kl_to_mp(eigs, fit)
    assert rep.dropped_zeros == 132
    with pytest.raises(InvalidInputError):
        dg.kl_to_mp(eigs, fit, bins=1)
    with pytest.raises(InvalidInputError):
        dg.kl_to_mp(eigs, fit, epsilon=0)


def test_feature_fit_is_rank_aware():
    x = np.random.default_rng(7).standard_normal((64, 196))
    eigs, fit = dg.feature_mp_fit(x)
    assert (fit.t, fit.n) == (196, 64)
    eigs, fit = dg.feature_mp_fit(linalg.subtract_rank_n(x, 1))
    assert (fit.t, fit.n) == (196, 63) and eigs.size == 63


def test_kl_direction_after_rank1_removal():
    drops = {}
    for spike in (1.2, 4.0):
        before, after = [], []
        for seed in range(30):
            x = synth.gen_feature(synth.SynthConfig(64, 14, 14, spike, seed=seed)).mat
            before.append(dg.feature_kl(x)[1].kl)
            after.append(dg.feature_kl(linalg.subtract_rank_n(x, 1))[1].kl)
        drops[spike] = np.mean(before) - np.mean(after)
    assert drops[1.2] > 0 and drops[4.0] > drops[1.2]


def test_explained_variance():
    assert dg.explained_variance([5.0, 0.0, 0.0], 1) == 1.0
    assert dg.explained_variance(np.ones(8), 1) == pytest.approx(1 / 8)
    assert dg.explained_variance([3.0, 4.0], 2) == 1.0
    with pytest.raises(DegenerateInputError):
        dg.explained_variance(np.zeros(3), 1)
    with pytest.raises(InvalidInputError):
        dg.explained_variance(np.ones(3), 4)


def test_spectrum_summary():
    assert np.allclose(dg.spectrum_summary(np.diag([3.0, 2.0, 1.0]), 2), [3, 2])
    x = np.random.default_rng(8).standard_normal((5, 7))
    assert np.allclose(dg.spectrum_summary(x, 5), np.linalg.svd(x, compute_uv=False), atol=1e-10)
    with pytest.raises(InvalidInputError):
        dg.spectrum_summary(x, 6)
