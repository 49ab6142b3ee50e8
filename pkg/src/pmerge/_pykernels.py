"""Row-wise numpy kernels; the fallback when the compiled ``_kernels`` is absent.

Every formula here is mirrored operation by operation in ``_kernels.pyx``.
The backends agree bit for bit except in ``ex_tight``'s geometric form,
where numpy's exp/log and the C library's may differ in the last place.
"""
import numpy as np

BACKEND = "python"

# calibrator family codes
RUGER, GRID_HARMONIC, GENERALIZED_GRID, ARITHMETIC, HARMONIC, GEOMETRIC, GENERALIZED_MEAN = range(7)
# dual condition modes
PREFIX_MAX, BATCH_THRESHOLD, EX_OR_RAND = range(3)
# tight exchangeable closed forms
TIGHT_ARITHMETIC, TIGHT_HARMONIC, TIGHT_GEOMETRIC = range(3)


LD = np.longdouble


def _calibrate_ld(code, raw, x, K, k, h, T, r, lam):
    """Calibrator values in long double, constants widened from float64 first.

    The bisection predicate compares sums of these values with a threshold;
    evaluating them in float64 can flip it near a crossing.
    """
    x = np.asarray(x, dtype=LD)
    K, k, h, T, r = (LD(float(c)) for c in (K, k, h, T, r))
    one, two, zero = LD(1), LD(2), LD(0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if code == RUGER:
            out = np.where(x <= k / K, K / k, zero)
            out[x == 0] = np.inf
        elif code == GRID_HARMONIC:
            c = np.maximum(np.ceil(K * h * x), one)
            out = np.where(h * x <= one, K / c, zero)
            out[x == 0] = K
        elif code == GENERALIZED_GRID:
            y = h * x
            lv = np.asarray(lam, dtype=float)[1:].astype(LD)
            j = np.searchsorted(lv, y, side="left")
            out = np.where(j < lv.size, one / lv[np.minimum(j, lv.size - 1)], zero)
            out[x == 0] = np.inf
        elif code == ARITHMETIC:
            out = two - two * x
            if not raw:
                out = np.where(x <= one, out, zero)
                out[x == 0] = np.inf
        elif code == HARMONIC:
            out = one / (T * x) - one / T
            if not raw:
                out = np.where(x <= one, np.minimum(out, K), zero)
        elif code == GEOMETRIC:
            out = -np.log(x)
            if not raw:
                out = np.where(x < one, out, zero)
        elif code == GENERALIZED_MEAN:
            out = r * (one - np.power(x, r)) / T
            if not raw:
                out = np.where(x <= one, np.minimum(out, K), zero)
        else:
            raise ValueError(f"unknown calibrator code {code}")
    return out


def calibrate(code, raw, x, K, k, h, T, r, lam):
    """Evaluate calibrator ``code`` elementwise. ``raw`` drops the positive part and cap."""
    return _calibrate_ld(code, raw, x, K, k, h, T, r, lam).astype(float)


def bisect_rows(P, U, code, raw, mode, K, k, h, T, r, lam, B):
    """Algorithm-1 bisection for each row of ``P``; returns the upper endpoints."""
    P = np.ascontiguousarray(P, dtype=float)
    n, L = P.shape
    U = np.broadcast_to(np.asarray(U, dtype=float), (n,)).astype(LD)
    PL = P.astype(LD)
    lo = np.zeros(n)
    hi = np.ones(n)
    ell = np.arange(1, L + 1, dtype=LD)
    for _ in range(B):
        a = (lo + hi) * 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            F = _calibrate_ld(code, raw, PL / a.astype(LD)[:, None], K, k, h, T, r, lam)
        cs = np.cumsum(F, axis=1)
        if mode == BATCH_THRESHOLD:
            ok = cs[:, -1] >= U * LD(L)
        else:
            ok = (cs >= ell).any(axis=1)
            if mode == EX_OR_RAND:
                ok |= F[:, 0] >= U
        hi = np.where(ok, a, hi)
        lo = np.where(ok, lo, a)
    return hi


def ex_quantile_min(P, k, K):
    """min over prefixes l of the ceil(l*k/K)-th smallest of the first l values; 0 on zeros."""
    P = np.ascontiguousarray(P, dtype=float)
    n, L = P.shape
    best = np.full(n, np.inf)
    for ell in range(1, L + 1):
        idx = (ell * k + K - 1) // K - 1
        S = np.partition(P[:, :ell], idx, axis=1) if ell > 1 else P[:, :1]
        np.minimum(best, S[:, idx], out=best)
    best[(P == 0).any(axis=1)] = 0.0
    return best


def ex_tight(P, form, T):
    """Double minimum over (l, m <= l) of the tight exchangeable closed forms.

    Terms: arithmetic 2 S_m / (2m - l) for 2m > l, harmonic (l T + m) / R_m,
    geometric exp(l/m + G_m/m), where S, R, G are running sums of p, 1/p
    and log p over the sorted first l values.
    """
    P = np.ascontiguousarray(P, dtype=float)
    n, L = P.shape
    best = np.full(n, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for ell in range(1, L + 1):
            S = np.sort(P[:, :ell], axis=1)
            m = np.arange(1, ell + 1, dtype=float)
            if form == TIGHT_ARITHMETIC:
                cs = np.cumsum(S, axis=1)
                den = 2.0 * m - ell
                terms = np.where(den > 0, 2.0 * cs / den, np.inf)
            elif form == TIGHT_HARMONIC:
                R = np.cumsum(1.0 / S, axis=1)
                terms = (ell * T + m) / R
            elif form == TIGHT_GEOMETRIC:
                G = np.cumsum(np.log(S), axis=1)
                terms = np.exp(ell / m + G / m)
            else:
                raise ValueError(f"unknown tight form {form}")
            np.minimum(best, terms.min(axis=1), out=best)
    if form == TIGHT_ARITHMETIC:
        best[(P == 0).any(axis=1)] = 0.0
    return best
