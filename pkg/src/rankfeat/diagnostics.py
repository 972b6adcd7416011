"""Random-matrix diagnostics: Marchenko-Pastur fits, KL to MP, explained variance.

Density convention: for an ``MPFit`` with sizes ``t`` and ``n``

    rho(lam) = (t/n) * sqrt((lam_plus - lam) * (lam - lam_minus)) / (2 pi lam sigma2)
    lam_minus, lam_plus = sigma2 * (1 -+ sqrt(n/t))**2

on ``[lam_minus, lam_plus]`` and zero elsewhere. Its total mass is
``min(1, t/n)``. With this parameterisation the eigenvalues of
``(1/cols) X X^T`` for a rows x cols noise matrix are matched by
``t = cols`` and ``n = rows``. :func:`feature_mp_fit` uses ``n = rank``
instead, so a matrix that lost a rank-1 component is compared on its
remaining nonzero spectrum rather than penalised for an exact zero.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .linalg import as_matrix, singular_values

DEFAULT_BINS = 50
DEFAULT_EPSILON = 1e-6

# Gauss-Legendre rule for the per-bin integrals (integrand is smooth in theta)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True)
class MPFit:
    sigma2: float
    t: int
    n: int

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")
        if self.t < 1 or self.n < 1:
            raise InvalidInputError("t and n must be positive")

    @property
    def ratio(self):
        return self.n / self.t

    @property
    def lambda_minus(self):
        return self.sigma2 * (1.0 - math.sqrt(self.ratio)) ** 2

    @property
    def lambda_plus(self):
        return self.sigma2 * (1.0 + math.sqrt(self.ratio)) ** 2

    @property
    def mass(self):
        """Mass of the continuous part, ``min(1, t/n)``."""
        return min(1.0, self.t / self.n)

    def as_dict(self):
        return {
            "sigma2": self.sigma2, "t": self.t, "n": self.n,
            "lambda_minus": self.lambda_minus, "lambda_plus": self.lambda_plus,
        }


@dataclass(frozen=True)
class HistogramKL:
    bins: int
    kl: float
    epsilon: float
    edges: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    dropped_zeros: int = 0


def sample_covariance_eigs(x):
    """Eigenvalues of ``(1/cols) X X^T``, nonincreasing; ``rows`` values.

    Computed from the singular values, so they are never negative. When
    rows > cols the trailing ``rows - cols`` values are exact zeros.
    """
    a = as_matrix(x)
    s = singular_values(a)
    eig = np.zeros(a.shape[0])
    eig[: s.shape[0]] = s * s / a.shape[1]
    return eig


def mp_density(lam, fit):
    """Marchenko-Pastur density; zero outside the support and at ``lam == 0``."""
    lam = np.asarray(lam, dtype=np.float64)
    lo, hi = fit.lambda_minus, fit.lambda_plus
    inside = (lam >= lo) & (lam <= hi) & (lam > 0)
    safe = np.where(inside, lam, 1.0)
    val = (fit.t / fit.n) * np.sqrt(np.clip((hi - safe) * (safe - lo), 0.0, None)) / (
        2.0 * math.pi * safe * fit.sigma2
    )
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _theta(lam, fit):
    c = 0.5 * (fit.lambda_plus + fit.lambda_minus)
    r = 0.5 * (fit.lambda_plus - fit.lambda_minus)
    return np.arccos(np.clip((c - np.asarray(lam, dtype=np.float64)) / r, -1.0, 1.0))


def mp_bin_masses(edges, fit):
    """MP mass in each histogram bin ``[edges[i], edges[i+1]]``.

    Integrates in ``lam = c - r cos(theta)``, which removes the square-root
    edge singularities.
    """
    edges = np.asarray(edges, dtype=np.float64)
    th = _theta(edges, fit)
    a, b = th[:-1], th[1:]
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b)[:, None] + half[:, None] * _GL_X[None, :]
    c = 0.5 * (fit.lambda_plus + fit.lambda_minus)
    r = 0.5 * (fit.lambda_plus - fit.lambda_minus)
    lam = c - r * np.cos(nodes)
    sin2 = np.sin(nodes) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(lam > 0, r * r * sin2 / lam, 0.0)
    if fit.lambda_minus == 0.0:
        # removable singularity at theta = 0: r^2 sin^2 / (r (1 - cos)) -> 2r
        g = np.where(lam > 0, g, 2.0 * r)
    g *= (fit.t / fit.n) / (2.0 * math.pi * fit.sigma2)
    return (g * _GL_W[None, :]).sum(axis=1) * half


def fit_mp(eigs, t, n):
    """First-moment fit: ``sigma2 = mean(eigs)``."""
    e = np.asarray(eigs, dtype=np.float64).ravel()
    if e.size == 0:
        raise InvalidInputError("cannot fit an empty spectrum")
    sigma2 = float(e.mean())
    if sigma2 <= 0:
        raise DegenerateInputError("all eigenvalues are zero")
    return MPFit(sigma2, int(t), int(n))


def numerical_rank_eigs(eigs, shape):
    """Eigenvalues above the usual ``max(shape) * eps * top`` rank threshold."""
    e = np.sort(np.asarray(eigs, dtype=np.float64).ravel())[::-1]
    if e.size == 0 or e[0] <= 0:
        raise DegenerateInputError("all eigenvalues are zero")
    # threshold on singular values, squared for eigenvalues
    tol = (max(shape) * np.finfo(np.float64).eps) ** 2 * e[0]
    return e[e > tol]


def feature_mp_fit(x):
    """Nonzero sample-covariance eigenvalues of ``x`` and their MP fit.

    Uses ``t = cols`` and ``n = numerical rank``.
    """
    a = as_matrix(x)
    eigs = numerical_rank_eigs(sample_covariance_eigs(a), a.shape)
    return eigs, fit_mp(eigs, t=a.shape[1], n=eigs.size)


def kl_to_mp(eigs, fit, bins=DEFAULT_BINS, epsilon=DEFAULT_EPSILON):
    """KL(empirical histogram || binned MP), in nats.

    Bins split ``[0, max(lam_plus, max eig)]`` evenly. When the fit's
    continuous part carries mass below one, the smallest
    ``round(len * (1 - mass))`` eigenvalues are treated as the point mass
    at zero and excluded. Both sides get ``epsilon`` added per bin and are
    renormalised.
    """
    if bins < 2:
        raise InvalidInputError("bins must be >= 2")
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be > 0")
    e = np.sort(np.asarray(eigs, dtype=np.float64).ravel())
    if e.size == 0:
        raise InvalidInputError("empty spectrum")
    drop = int(round(e.size * (1.0 - fit.mass)))
    drop = min(drop, e.size - 1)
    kept = e[drop:]
    top = max(fit.lambda_plus, float(kept[-1]))
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(kept, bins=edges)
    p = counts / kept.size
    q = mp_bin_masses(edges, fit)
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    p = (p + epsilon) / (p + epsilon).sum()
    q = (q + epsilon) / (q + epsilon).sum()
    kl = float(np.sum(p * np.log(p / q)))
    return HistogramKL(bins, max(kl, 0.0), epsilon, edges, p, q, drop)


def feature_kl(x, bins=DEFAULT_BINS, epsilon=DEFAULT_EPSILON):
    """Fit MP to a feature matrix and return ``(fit, HistogramKL)``."""
    eigs, fit = feature_mp_fit(x)
    return fit, kl_to_mp(eigs, fit, bins, epsilon)


def explained_variance(spectrum, k):
    """Share of the squared singular values captured by the top ``k``."""
    s = np.sort(np.abs(np.asarray(spectrum, dtype=np.float64).ravel()))[::-1]
    if not 1 <= k <= s.size:
        raise InvalidInputError(f"k must be in [1, {s.size}], got {k}")
    sq = s * s
    total = float(sq.sum())
    if total == 0.0:
        raise DegenerateInputError("explained variance of a zero spectrum")
    return float(sq[:k].sum()) / total


def spectrum_summary(x, top_k):
    """Leading ``top_k`` singular values of ``x``."""
    a = as_matrix(x)
    if not 1 <= top_k <= min(a.shape):
        raise InvalidInputError(f"top_k must be in [1, {min(a.shape)}], got {top_k}")
    return singular_values(a)[:top_k]
