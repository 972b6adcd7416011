"""Dense spectral primitives: SVD, power iteration and rank-k removal.

Matrices are plain 2-D ``float64`` numpy arrays. The SVD is a
Golub-Kahan-Reinsch implementation: Householder bidiagonalisation followed
by implicit-shift QR sweeps on the bidiagonal. The QR sweeps are the hot
loop and run in a compiled extension when it is importable, otherwise in a
pure-Python fallback with identical results up to rounding.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

try:
    from ._bidiag import bidiag_qr as _compiled_bidiag_qr
except ImportError:  # pragma: no cover - depends on the build
    _compiled_bidiag_qr = None
from ._bidiag_py import bidiag_qr as _python_bidiag_qr

#: Name of the backend selected at import: ``"compiled"`` or ``"python"``.
BACKEND = "compiled" if _compiled_bidiag_qr is not None else "python"

SIGN_TOL = 1e-12

__all__ = [
    "BACKEND",
    "SingularTriplet",
    "PowerIterationResult",
    "as_matrix",
    "svd",
    "singular_values",
    "dominant_triplet",
    "power_iteration",
    "subtract_rank1",
    "subtract_rank_n",
]


def _kernel(backend):
    if backend is None:
        backend = BACKEND
    if backend == "compiled":
        if _compiled_bidiag_qr is None:
            raise InvalidInputError("compiled backend is not available")
        return _compiled_bidiag_qr
    if backend == "python":
        return _python_bidiag_qr
    raise InvalidInputError(f"unknown backend {backend!r}")


def as_matrix(x, name="matrix"):
    """Validate ``x`` as a finite, non-empty 2-D array and return a float64 copy-free view."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must have at least one row and column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def _first_significant_sign(vec):
    idx = np.flatnonzero(np.abs(vec) > SIGN_TOL)
    if idx.size == 0:
        return 1.0
    return -1.0 if vec[idx[0]] < 0 else 1.0


@dataclass(frozen=True)
class SingularTriplet:
    """Singular value ``s`` with unit left vector ``u`` and right vector ``v``.

    The pair is normalised so the first entry of ``u`` with magnitude above
    1e-12 is nonnegative.
    """

    s: float
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.s < 0:
            raise InvalidInputError("singular value must be nonnegative")

    @classmethod
    def normalized(cls, s, u, v):
        sign = _first_significant_sign(u)
        return cls(float(s), sign * np.asarray(u, dtype=np.float64), sign * np.asarray(v, dtype=np.float64))

    def outer(self):
        return self.s * np.outer(self.u, self.v)


def _householder(x):
    """Return (v, beta) with (I - beta v v^T) x = -sign(x0)|x| e0 and v[0] = 1."""
    v = x.copy()
    alpha = np.linalg.norm(x)
    if alpha == 0.0:
        v[:] = 0.0
        v[0] = 1.0
        return v, 0.0
    if x[0] < 0:
        alpha = -alpha
    v[0] += alpha
    v /= v[0]
    beta = 2.0 / float(v @ v)
    return v, beta


def _bidiagonalize(a, accumulate=True):
    """Householder reduction of a tall ``a`` (m >= n) to upper bidiagonal form.

    Returns ``d, e, ut, vt`` with ``a = ut.T @ B @ vt`` where ``B`` has
    diagonal ``d`` and superdiagonal ``e``; ``ut`` is n x m, ``vt`` is n x n.
    With ``accumulate=False`` both factors are empty n x 0 arrays, which
    turns the rotations in the QR sweeps into no-ops.
    """
    a = np.array(a, dtype=np.float64, order="C")
    m, n = a.shape
    left = []
    right = []
    for k in range(n):
        v, beta = _householder(a[k:, k])
        if beta:
            a[k:, k:] -= beta * np.outer(v, v @ a[k:, k:])
        left.append((v, beta))
        if k < n - 2:
            v, beta = _householder(a[k, k + 1:])
            if beta:
                a[k:, k + 1:] -= beta * np.outer(a[k:, k + 1:] @ v, v)
            right.append((v, beta))
    d = np.diag(a)[:n].copy()
    e = np.diag(a, 1)[: n - 1].copy()
    if not accumulate:
        return d, e, np.zeros((n, 0)), np.zeros((n, 0))

    # accumulate U^T (n x m) and V^T (n x n) backwards: U = H_0 ... H_{n-1} I[:, :n]
    ut = np.zeros((n, m))
    ut[:, :n] = np.eye(n)
    for k in range(n - 1, -1, -1):
        v, beta = left[k]
        if beta:
            blk = ut[k:, k:]
            blk -= beta * np.outer(blk @ v, v)
    vt = np.eye(n)
    for k in range(len(right) - 1, -1, -1):
        v, beta = right[k]
        if beta:
            blk = vt[k + 1:, k + 1:]
            blk -= beta * np.outer(blk @ v, v)
    return d, e, ut, vt


def _diagonalize(a, backend, accumulate):
    # power-of-two scaling is exact and keeps squared values clear of
    # underflow and overflow inside the QR shifts
    top = float(np.abs(a).max())
    scale = 2.0 ** np.frexp(top)[1] if top > 0 else 1.0
    d, e, ut, vt = _bidiagonalize(a / scale, accumulate)
    _kernel(backend)(d, e, ut, vt)
    d *= scale
    return d, e, ut, vt


def svd(x, backend=None):
    """Thin SVD ``x = U @ diag(S) @ V.T``.

    Returns ``(U, S, V)`` with ``U`` rows x r, ``V`` cols x r and
    ``r = min(rows, cols)``; ``S`` is nonincreasing and each column pair
    follows the :class:`SingularTriplet` sign convention.
    """
    a = as_matrix(x, "svd input")
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    d, e, ut, vt = _diagonalize(a, backend, True)

    neg = d < 0
    d[neg] = -d[neg]
    vt[neg] = -vt[neg]
    # stable sort keeps equal values in bidiagonal order; deterministic across backends
    order = np.argsort(-d, kind="stable")
    s = d[order]
    u = ut[order].T
    v = vt[order].T
    if transposed:
        u, v = v, u
    for j in range(s.shape[0]):
        sign = _first_significant_sign(u[:, j])
        if sign < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return np.ascontiguousarray(u), s, np.ascontiguousarray(v)


def singular_values(x, backend=None):
    """Nonincreasing singular values of ``x``; skips the singular vectors."""
    a = as_matrix(x, "svd input")
    if a.shape[0] < a.shape[1]:
        a = a.T
    d = np.abs(_diagonalize(a, backend, False)[0])
    return -np.sort(-d)


def dominant_triplet(x, backend=None):
    """First singular triplet of ``x`` computed by the full SVD."""
    u, s, v = svd(x, backend=backend)
    return SingularTriplet(float(s[0]), u[:, 0].copy(), v[:, 0].copy())


class PowerIterationResult(NamedTuple):
    triplet: SingularTriplet
    iters_used: int
    converged: bool
    degenerate: bool
    history: tuple


def _gap_estimate(x, u_cur, u_prev):
    """Relative gap (s1 - s2) / s1 from Rayleigh-Ritz on span{u_cur, u_prev}.

    Cheap: two matvecs and a 2x2 eigenproblem. Returns 1.0 when the two
    iterates are numerically parallel, i.e. no evidence of a tie.
    """
    w = u_prev - (u_cur @ u_prev) * u_cur
    nw = np.linalg.norm(w)
    if nw < 1e-8:
        return 1.0
    w /= nw
    xu = x @ u_cur
    xw = x @ w
    g = np.array([[xu @ xu, xu @ xw], [xu @ xw, xw @ xw]])
    lam = np.linalg.eigvalsh(g)
    s1 = np.sqrt(max(lam[1], 0.0))
    s2 = np.sqrt(max(lam[0], 0.0))
    if s1 == 0.0:
        return 0.0
    return (s1 - s2) / s1


def power_iteration(x, max_iters=100, tol=1e-6, start=None, seed=None, window=10):
    """Dominant singular triplet by the coupled (two-sided) power iteration.

    Each iteration does ``a = X r / |X r|`` then ``r = X^T a / |X^T a|``
    and takes ``s = |X^T a| = a^T X r``. The right vector ``r`` starts at
    the normalised all-ones vector, or at a seeded Gaussian direction when
    ``seed`` is given, or at ``start``. Stops when the relative change in
    ``s`` drops below ``tol`` or after ``max_iters`` iterations.

    If the last ``window`` relative changes are not shrinking and a
    Rayleigh-Ritz estimate of the top-two gap is below 1e-6, the result is
    flagged ``degenerate``; callers may fall back to :func:`svd`.
    """
    a = as_matrix(x, "power iteration input")
    if max_iters < 1:
        raise InvalidInputError("max_iters must be >= 1")
    if not tol > 0:
        raise InvalidInputError("tol must be > 0")
    if not np.any(a):
        raise DegenerateInputError("power iteration on a zero matrix")

    if start is not None:
        r = np.array(start, dtype=np.float64).ravel()
        if r.shape[0] != a.shape[1]:
            raise InvalidInputError("start vector length must equal the column count")
    elif seed is not None:
        r = np.random.Generator(np.random.Philox(seed)).standard_normal(a.shape[1])
    else:
        r = np.ones(a.shape[1])
    nr = np.linalg.norm(r)
    if nr == 0.0:
        raise InvalidInputError("start vector is zero")
    r = r / nr

    history = []
    changes = []
    s_prev = None
    r_prev = r
    converged = False
    degenerate = False
    it = 0
    left = None
    for it in range(1, max_iters + 1):
        xr = a @ r
        nxr = np.linalg.norm(xr)
        if nxr == 0.0:
            # start vector in the null space; restart on a fixed canonical axis
            r = np.zeros_like(r)
            r[int(np.argmax(np.abs(a).sum(axis=0)))] = 1.0
            xr = a @ r
            nxr = np.linalg.norm(xr)
        left = xr / nxr
        xtl = a.T @ left
        s = float(np.linalg.norm(xtl))
        r_prev, r = r, xtl / s
        history.append(s)
        if s_prev is not None:
            change = abs(s - s_prev) / s
            changes.append(change)
            if change < tol:
                converged = True
                break
            if len(changes) >= window:
                recent = changes[-window:]
                shrinking = all(b <= c for c, b in zip(recent, recent[1:]))
                if not shrinking and _gap_estimate(a, r, r_prev) < 1e-6:
                    degenerate = True
        s_prev = s

    trip = SingularTriplet.normalized(history[-1], left, r)
    return PowerIterationResult(trip, it, converged, degenerate, tuple(history))


def _check_triplet(a, t):
    u = np.asarray(t.u, dtype=np.float64)
    v = np.asarray(t.v, dtype=np.float64)
    if u.shape != (a.shape[0],) or v.shape != (a.shape[1],):
        raise InvalidInputError(
            f"triplet shapes {u.shape}, {v.shape} do not match matrix {a.shape}"
        )
    return u, v


def subtract_rank1(x, t):
    """Return ``x - s u v^T``; ``x`` is left untouched."""
    a = as_matrix(x)
    u, v = _check_triplet(a, t)
    return a - t.s * np.outer(u, v)


def subtract_rank_n(x, n, backend=None):
    """Remove the top-``n`` singular components of ``x``."""
    a = as_matrix(x)
    r = min(a.shape)
    if not 1 <= n <= r:
        raise InvalidInputError(f"n must be in [1, {r}], got {n}")
    u, s, v = svd(a, backend=backend)
    return a - (u[:, :n] * s[:n]) @ v[:, :n].T
