"""Pure-Python implicit-shift QR on an upper bidiagonal matrix.

Fallback for :mod:`rankfeat._bidiag`; both expose the same ``bidiag_qr``.
Rotations are accumulated into the row-stored factors ``ut`` (n x m, the
transposed left factor) and ``vt`` (n x p), so every update touches two
contiguous rows.
"""
import math

import numpy as np

from .errors import ConvergenceError

EPS = np.finfo(np.float64).eps


def _givens(f, g):
    if g == 0.0:
        return 1.0, 0.0, f
    r = math.hypot(f, g)
    return f / r, g / r, r


def _rot_rows(a, i, j, c, s):
    # row_i <- c*row_i + s*row_j ; row_j <- -s*row_i + c*row_j
    ri = a[i].copy()
    a[i] *= c
    a[i] += s * a[j]
    a[j] *= c
    a[j] -= s * ri


def bidiag_qr(d, e, ut, vt, max_sweeps=75):
    """Diagonalise the bidiagonal ``diag(d) + superdiag(e)`` in place.

    On return ``d`` holds the (signed, unsorted) singular values and ``e``
    is zero. Returns the number of QR steps taken.
    """
    n = d.shape[0]
    if n <= 1:
        return 0
    anorm = 0.0
    for i in range(n):
        anorm = max(anorm, abs(d[i]) + (abs(e[i]) if i < n - 1 else 0.0))
    if anorm == 0.0:
        return 0
    dtol = EPS * anorm
    steps = 0
    limit = max_sweeps * n * n
    while True:
        for i in range(n - 1):
            if abs(e[i]) <= EPS * (abs(d[i]) + abs(d[i + 1])) or abs(e[i]) <= 0.5 * dtol * EPS:
                e[i] = 0.0
        for i in range(n):
            if abs(d[i]) <= dtol:
                d[i] = 0.0
        hi = n - 1
        while hi > 0 and e[hi - 1] == 0.0:
            hi -= 1
        if hi == 0:
            return steps
        lo = hi - 1
        while lo > 0 and e[lo - 1] != 0.0:
            lo -= 1
        steps += 1
        if steps > limit:
            raise ConvergenceError("bidiagonal QR did not converge")

        zero_at = -1
        for i in range(lo, hi):
            if d[i] == 0.0:
                zero_at = i
                break
        if zero_at >= 0:
            # chase e[zero_at] to the right with left rotations
            i = zero_at
            f = e[i]
            e[i] = 0.0
            for j in range(i + 1, hi + 1):
                c, s, r = _givens(d[j], f)
                d[j] = r
                if j < hi:
                    f = -s * e[j]
                    e[j] = c * e[j]
                _rot_rows(ut, j, i, c, s)
            continue
        if d[hi] == 0.0:
            # chase e[hi-1] upwards with right rotations
            f = e[hi - 1]
            e[hi - 1] = 0.0
            for k in range(hi - 1, lo - 1, -1):
                c, s, r = _givens(d[k], f)
                d[k] = r
                if k > lo:
                    f = -s * e[k - 1]
                    e[k - 1] = c * e[k - 1]
                _rot_rows(vt, k, hi, c, s)
            continue

        # Wilkinson shift from the trailing 2x2 of B^T B
        dm, dn, em = d[hi - 1], d[hi], e[hi - 1]
        el = e[hi - 2] if hi - 1 > lo else 0.0
        ta = dm * dm + el * el
        tb = dm * em
        tc = dn * dn + em * em
        delta = 0.5 * (ta - tc)
        denom = abs(delta) + math.hypot(delta, tb)
        if denom == 0.0:
            mu = tc
        else:
            mu = tc - tb * tb / (math.copysign(denom, delta) if delta != 0.0 else denom)
        y = d[lo] * d[lo] - mu
        z = d[lo] * e[lo]
        for k in range(lo, hi):
            c, s, r = _givens(y, z)
            if k > lo:
                e[k - 1] = r
            dk, ek = d[k], e[k]
            y = c * dk + s * ek
            e[k] = -s * dk + c * ek
            z = s * d[k + 1]
            d[k + 1] = c * d[k + 1]
            _rot_rows(vt, k, k + 1, c, s)

            c, s, r = _givens(y, z)
            d[k] = r
            ek, dk1 = e[k], d[k + 1]
            y = c * ek + s * dk1
            d[k + 1] = -s * ek + c * dk1
            if k < hi - 1:
                z = s * e[k + 1]
                e[k + 1] = c * e[k + 1]
            _rot_rows(ut, k, k + 1, c, s)
        e[hi - 1] = y
