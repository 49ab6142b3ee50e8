# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-wise kernels. Mirrors ``_pykernels`` operation by operation."""
import numpy as np
from libc.math cimport ceill, exp, log, logl, powl, INFINITY

BACKEND = "cython"

cdef enum:
    RUGER = 0
    GRID_HARMONIC = 1
    GENERALIZED_GRID = 2
    ARITHMETIC = 3
    HARMONIC = 4
    GEOMETRIC = 5
    GENERALIZED_MEAN = 6

cdef enum:
    PREFIX_MAX = 0
    BATCH_THRESHOLD = 1
    EX_OR_RAND = 2

cdef enum:
    TIGHT_ARITHMETIC = 0
    TIGHT_HARMONIC = 1
    TIGHT_GEOMETRIC = 2


# calibrators are evaluated in long double: the bisection predicate compares
# sums of f against a threshold and float64 rounding there can flip it
ctypedef long double ld


cdef struct Cal:
    int code
    bint raw
    ld K, k, h, T, r
    const double* lam
    Py_ssize_t M


cdef inline ld _f(const Cal* c, ld x) noexcept nogil:
    cdef ld v, y, cc
    cdef Py_ssize_t j
    if c.code == RUGER:
        if x == 0.0:
            return INFINITY
        return c.K / c.k if x <= c.k / c.K else 0.0
    elif c.code == GRID_HARMONIC:
        if x == 0.0:
            return c.K
        if c.h * x <= 1.0:
            cc = ceill(c.K * c.h * x)
            if cc < 1.0:
                cc = 1.0
            return c.K / cc
        return 0.0
    elif c.code == GENERALIZED_GRID:
        if x == 0.0:
            return INFINITY
        y = c.h * x
        for j in range(1, c.M + 1):
            if y <= c.lam[j]:
                return 1.0 / <ld>c.lam[j]
        return 0.0
    elif c.code == ARITHMETIC:
        if c.raw:
            return 2.0 - 2.0 * x
        if x == 0.0:
            return INFINITY
        return 2.0 - 2.0 * x if x <= 1.0 else 0.0
    elif c.code == HARMONIC:
        v = 1.0 / (c.T * x) - 1.0 / c.T
        if c.raw:
            return v
        if x <= 1.0:
            return v if v < c.K else c.K
        return 0.0
    elif c.code == GEOMETRIC:
        if c.raw:
            return -logl(x)
        return -logl(x) if x < 1.0 else 0.0
    else:
        v = c.r * (1.0 - powl(x, c.r)) / c.T
        if c.raw:
            return v
        if x <= 1.0:
            return v if v < c.K else c.K
        return 0.0


cdef inline bint _cond(const Cal* c, const double* p, Py_ssize_t L, int mode,
                       double u, double a) noexcept nogil:
    cdef ld s = 0.0, fv
    cdef Py_ssize_t i
    if mode == BATCH_THRESHOLD:
        for i in range(L):
            s += _f(c, <ld>p[i] / <ld>a)
        return s >= <ld>u * <ld>L
    for i in range(L):
        fv = _f(c, <ld>p[i] / <ld>a)
        if i == 0 and mode == EX_OR_RAND and fv >= <ld>u:
            return True
        s += fv
        if s >= i + 1:
            return True
    return False


def calibrate(int code, bint raw, x, double K, double k, double h, double T,
              double r, lam):
    """Elementwise calibrator evaluation (long double internally, float64 out)."""
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    xa = np.asarray(x, dtype=float)
    cdef const double[::1] xv = np.ascontiguousarray(xa.reshape(-1))
    out = np.empty(xv.shape[0])
    cdef double[::1] o = out
    cdef Cal c
    c.code = code; c.raw = raw; c.K = K; c.k = k; c.h = h; c.T = T; c.r = r
    c.lam = &lv[0]; c.M = lv.shape[0] - 1
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        o[i] = <double>_f(&c, xv[i])
    return out.reshape(xa.shape)


def bisect_rows(P, U, int code, bint raw, int mode, double K, double k, double h,
                double T, double r, lam, int B):
    """Algorithm-1 bisection for each row of ``P``; returns the upper endpoints."""
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=float)
    cdef Py_ssize_t n = Pv.shape[0], L = Pv.shape[1]
    cdef const double[::1] Uv = np.ascontiguousarray(
        np.broadcast_to(np.asarray(U, dtype=float), (n,)))
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Cal c
    c.code = code; c.raw = raw; c.K = K; c.k = k; c.h = h; c.T = T; c.r = r
    c.lam = &lv[0]; c.M = lv.shape[0] - 1
    cdef Py_ssize_t i
    cdef int it
    cdef double lo, hi, a
    with nogil:
        for i in range(n):
            lo = 0.0
            hi = 1.0
            for it in range(B):
                a = (lo + hi) * 0.5
                if _cond(&c, &Pv[i, 0], L, mode, Uv[i], a):
                    hi = a
                else:
                    lo = a
            o[i] = hi
    return out


cdef inline void _insert(double* buf, Py_ssize_t n, double x) noexcept nogil:
    # buf[:n] is sorted ascending; insert x keeping order
    cdef Py_ssize_t j = n
    while j > 0 and buf[j - 1] > x:
        buf[j] = buf[j - 1]
        j -= 1
    buf[j] = x


def ex_quantile_min(P, Py_ssize_t k, Py_ssize_t K):
    """min over prefixes l of the ceil(l*k/K)-th smallest of the first l values; 0 on zeros."""
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=float)
    cdef Py_ssize_t n = Pv.shape[0], L = Pv.shape[1], i, ell, idx
    out = np.empty(n)
    cdef double[::1] o = out
    buf = np.empty(L)
    cdef double[::1] b = buf
    cdef double best, x
    cdef bint zero
    with nogil:
        for i in range(n):
            best = INFINITY
            zero = False
            for ell in range(1, L + 1):
                x = Pv[i, ell - 1]
                if x == 0.0:
                    zero = True
                _insert(&b[0], ell - 1, x)
                idx = (ell * k + K - 1) // K - 1
                if b[idx] < best:
                    best = b[idx]
            o[i] = 0.0 if zero else best
    return out


def ex_tight(P, int form, double T):
    """Double minimum over (l, m <= l) of the tight exchangeable closed forms."""
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=float)
    cdef Py_ssize_t n = Pv.shape[0], L = Pv.shape[1], i, ell, m
    out = np.empty(n)
    cdef double[::1] o = out
    buf = np.empty(L)
    cdef double[::1] b = buf
    cdef double best, acc, term, x, dm, den
    cdef bint zero
    with nogil:
        for i in range(n):
            best = INFINITY
            zero = False
            for ell in range(1, L + 1):
                x = Pv[i, ell - 1]
                if x == 0.0:
                    zero = True
                _insert(&b[0], ell - 1, x)
                acc = 0.0
                for m in range(1, ell + 1):
                    dm = <double>m
                    if form == TIGHT_ARITHMETIC:
                        acc += b[m - 1]
                        den = 2.0 * dm - ell
                        if den <= 0:
                            continue
                        term = 2.0 * acc / den
                    elif form == TIGHT_HARMONIC:
                        acc += 1.0 / b[m - 1]
                        term = (ell * T + dm) / acc
                    else:
                        acc += log(b[m - 1])
                        term = exp(ell / dm + acc / dm)
                    if term < best:
                        best = term
            if form == TIGHT_ARITHMETIC and zero:
                best = 0.0
            o[i] = best
    return out
