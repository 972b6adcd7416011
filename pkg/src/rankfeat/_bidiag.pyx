# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implicit-shift QR on an upper bidiagonal matrix.

Same contract as :func:`rankfeat._bidiag_py.bidiag_qr`.
"""
from libc.math cimport fabs, hypot, copysign

from .errors import ConvergenceError

cdef double EPS = 2.220446049250313e-16


cdef inline void _givens(double f, double g, double* c, double* s, double* r) nogil:
    cdef double h
    if g == 0.0:
        c[0] = 1.0
        s[0] = 0.0
        r[0] = f
        return
    h = hypot(f, g)
    c[0] = f / h
    s[0] = g / h
    r[0] = h


cdef inline void _rot_rows(double[:, ::1] a, Py_ssize_t i, Py_ssize_t j,
                           double c, double s) nogil:
    cdef Py_ssize_t k
    cdef double x, y
    for k in range(a.shape[1]):
        x = a[i, k]
        y = a[j, k]
        a[i, k] = c * x + s * y
        a[j, k] = c * y - s * x


cdef long _run(double[::1] d, double[::1] e, double[:, ::1] ut,
               double[:, ::1] vt, long limit) nogil:
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i, j, k, lo, hi, zero_at
    cdef double anorm = 0.0, dtol, f, c = 1.0, s = 0.0, r = 0.0
    cdef double dm, dn, em, el, ta, tb, tc, delta, denom, mu, y, z, dk, ek, dk1
    cdef long steps = 0

    for i in range(n):
        f = fabs(d[i])
        if i < n - 1:
            f += fabs(e[i])
        if f > anorm:
            anorm = f
    if anorm == 0.0:
        return 0
    dtol = EPS * anorm

    while True:
        for i in range(n - 1):
            if fabs(e[i]) <= EPS * (fabs(d[i]) + fabs(d[i + 1])) or fabs(e[i]) <= 0.5 * dtol * EPS:
                e[i] = 0.0
        for i in range(n):
            if fabs(d[i]) <= dtol:
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
            return -1

        zero_at = -1
        for i in range(lo, hi):
            if d[i] == 0.0:
                zero_at = i
                break
        if zero_at >= 0:
            i = zero_at
            f = e[i]
            e[i] = 0.0
            for j in range(i + 1, hi + 1):
                _givens(d[j], f, &c, &s, &r)
                d[j] = r
                if j < hi:
                    f = -s * e[j]
                    e[j] = c * e[j]
                _rot_rows(ut, j, i, c, s)
            continue
        if d[hi] == 0.0:
            f = e[hi - 1]
            e[hi - 1] = 0.0
            k = hi - 1
            while k >= lo:
                _givens(d[k], f, &c, &s, &r)
                d[k] = r
                if k > lo:
                    f = -s * e[k - 1]
                    e[k - 1] = c * e[k - 1]
                _rot_rows(vt, k, hi, c, s)
                k -= 1
            continue

        dm = d[hi - 1]
        dn = d[hi]
        em = e[hi - 1]
        el = e[hi - 2] if hi - 1 > lo else 0.0
        ta = dm * dm + el * el
        tb = dm * em
        tc = dn * dn + em * em
        delta = 0.5 * (ta - tc)
        denom = fabs(delta) + hypot(delta, tb)
        if denom == 0.0:
            mu = tc
        elif delta != 0.0:
            mu = tc - tb * tb / copysign(denom, delta)
        else:
            mu = tc - tb * tb / denom
        y = d[lo] * d[lo] - mu
        z = d[lo] * e[lo]
        for k in range(lo, hi):
            _givens(y, z, &c, &s, &r)
            if k > lo:
                e[k - 1] = r
            dk = d[k]
            ek = e[k]
            y = c * dk + s * ek
            e[k] = -s * dk + c * ek
            z = s * d[k + 1]
            d[k + 1] = c * d[k + 1]
            _rot_rows(vt, k, k + 1, c, s)

            _givens(y, z, &c, &s, &r)
            d[k] = r
            ek = e[k]
            dk1 = d[k + 1]
            y = c * ek + s * dk1
            d[k + 1] = -s * ek + c * dk1
            if k < hi - 1:
                z = s * e[k + 1]
                e[k + 1] = c * e[k + 1]
            _rot_rows(ut, k, k + 1, c, s)
        e[hi - 1] = y


def bidiag_qr(double[::1] d, double[::1] e, double[:, ::1] ut,
              double[:, ::1] vt, long max_sweeps=75):
    """Diagonalise ``diag(d) + superdiag(e)`` in place; see the fallback."""
    cdef Py_ssize_t n = d.shape[0]
    cdef long steps
    if n <= 1:
        return 0
    with nogil:
        steps = _run(d, e, ut, vt, max_sweeps * n * n)
    if steps < 0:
        raise ConvergenceError("bidiagonal QR did not converge")
    return steps
