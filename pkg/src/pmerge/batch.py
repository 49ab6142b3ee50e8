"""P-merging functions valid under arbitrary dependence.

Row functions (``*_rows``) act on an (n, K) matrix and return capped merged
values; the public functions wrap them for a single vector. Several rules
are the u = 1 case of a randomized rule and share its code path, so the
reductions hold bit for bit.
"""
from __future__ import annotations

import numpy as np

from .calibrators import CalibratorSpec, check_grid, harmonic_number, harmonic_threshold
from .core import ParameterError, RuleSpec, cap, ceil_index, check_k, order_stats


def _errstate():
    return np.errstate(divide="ignore", invalid="ignore", over="ignore")


def median_k(K: int) -> int:
    """Index of the "twice the median" preset."""
    return (K + 1) // 2


# -- shared u-parametrized kernels (u = 1 gives the batch rules)


def as_u(U, n):
    """Per-row thresholds as a float array; batch rules pass ones so both paths match."""
    return np.array(np.broadcast_to(np.asarray(U, dtype=float), (n,)))


def mean_simple_rows(P, U):
    """2 A(p) / (2 - u)."""
    return cap(2.0 * P.mean(axis=1) / (2.0 - as_u(U, P.shape[0])))


def harmonic_simple_rows(P, U, T):
    """(T u + 1) H(p)."""
    with _errstate():
        H = P.shape[1] / (1.0 / P).sum(axis=1)
    return cap((T * as_u(U, P.shape[0]) + 1.0) * H)


def harmonic_sorted_rows(P, U, T):
    """min_m (u K T / m + 1) H(p_(m)), written as (u K T + m) / sum_{j<=m} 1/p_(j)."""
    K = P.shape[1]
    m = np.arange(1, K + 1, dtype=float)
    U = as_u(U, P.shape[0])
    with _errstate():
        R = np.cumsum(1.0 / order_stats(P), axis=1)
        terms = ((U * K * T)[:, None] + m) / R
    return cap(terms.min(axis=1))


def geometric_simple_rows(P, U):
    """e^u G(p)."""
    with _errstate():
        G = np.exp(np.log(P).mean(axis=1))
    return cap(np.exp(as_u(U, P.shape[0])) * G)


def geometric_sorted_rows(P, U):
    """min_m exp(u K / m) G(p_(m))."""
    K = P.shape[1]
    m = np.arange(1, K + 1, dtype=float)
    U = as_u(U, P.shape[0])
    with _errstate():
        L = np.cumsum(np.log(order_stats(P)), axis=1)
        terms = np.exp((U * K)[:, None] / m + L / m)
    return cap(terms.min(axis=1))


def power_mean(P, r):
    """M_r along the last axis; 0 entries give 0 for r < 0."""
    with _errstate():
        return np.power(np.power(P, r).mean(axis=-1), 1.0 / r)


def gm_simple_rows(P, U, r, T):
    """M_r(p) / (1 - u T / r)^(1/r)."""
    U = as_u(U, P.shape[0])
    return cap(power_mean(P, r) / np.power(1.0 - U * T / r, 1.0 / r))


# -- batch rules


def identity_if_single(fn):
    """Every batch rule is the identity on a single p-value."""
    def wrapped(P, *args, **kw):
        if P.shape[1] == 1:
            return cap(P[:, 0].copy())
        return fn(P, *args, **kw)
    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@identity_if_single
def bonferroni_rows(P):
    return cap(P.shape[1] * P.min(axis=1))


@identity_if_single
def ruger_rows(P, k):
    K = P.shape[1]
    k = check_k(k, K)
    S = order_stats(P)
    out = K / k * S[:, k - 1]
    out[S[:, 0] == 0] = 0.0
    return cap(out)


@identity_if_single
def hommel_rows(P):
    """Classical form h_K min_k (K/k) p_(k)."""
    K = P.shape[1]
    S = order_stats(P)
    terms = K / np.arange(1, K + 1) * S
    return cap(harmonic_number(K) * terms.min(axis=1))


@identity_if_single
def generalized_hommel_rows(P, lambdas):
    """h_M min_j p_(ceil(lambda_j K)) / lambda_j."""
    lam = check_grid(lambdas)
    K = P.shape[1]
    S = order_stats(P)
    h = CalibratorSpec.generalized_grid(lam).h
    idx = [ceil_index(x, K) for x in lam[1:]]
    if max(idx) > K:
        raise ParameterError("lambda grid exceeds the number of p-values")
    terms = np.stack([S[:, i - 1] / x for i, x in zip(idx, lam[1:])], axis=1)
    out = h * terms.min(axis=1)
    out[S[:, 0] == 0] = 0.0
    return cap(out)


@identity_if_single
def twice_average_rows(P):
    return mean_simple_rows(P, np.ones(P.shape[0]))


@identity_if_single
def harmonic_rows(P, variant="plain"):
    T = harmonic_threshold(P.shape[1])
    if variant == "plain":
        return harmonic_simple_rows(P, np.ones(P.shape[0]), T)
    return harmonic_sorted_rows(P, np.ones(P.shape[0]), T)


@identity_if_single
def geometric_rows(P, variant="plain"):
    if variant == "plain":
        return geometric_simple_rows(P, np.ones(P.shape[0]))
    return geometric_sorted_rows(P, np.ones(P.shape[0]))


@identity_if_single
def generalized_mean_rows(P, r):
    T = CalibratorSpec.generalized_mean(r, P.shape[1]).T
    return gm_simple_rows(P, np.ones(P.shape[0]), r, T)


# -- independence baselines (simulation comparisons only)


def fisher_rows(P):
    """Fisher's combination; assumes independent p-values."""
    from scipy.special import chdtrc

    K = P.shape[1]
    with _errstate():
        stat = -2.0 * np.log(P).sum(axis=1)
    return chdtrc(2 * K, stat)


def simes_rows(P):
    """Simes' combination; assumes independence or positive dependence."""
    K = P.shape[1]
    S = order_stats(P)
    return cap((K * S / np.arange(1, K + 1)).min(axis=1))


# -- public single-vector API


def _merge(rule, p, **kw):
    from .rules import merge

    return merge(rule, p, **kw)


def bonferroni(p):
    """K times the smallest p-value."""
    return _merge(RuleSpec("bonferroni"), p)


def ruger(p, k):
    """(K/k) p_(k)."""
    return _merge(RuleSpec("ruger", k=k), p)


def median(p):
    """Twice the median: Ruger with k = ceil(K/2)."""
    return _merge(RuleSpec("median"), p)


def hommel(p, exact=False, method=None, iters=50):
    """Classical Hommel, or its grid-harmonic refinement when ``exact``.

    ``method`` selects bisection (default) or ``"exact"`` breakpoint search
    for the refined form.
    """
    rule = RuleSpec("hommel", "exact" if exact else "classical",
                    method=method or "closed", iters=iters)
    return _merge(rule, p)


def generalized_hommel(p, lambdas, exact=False, method=None, iters=50):
    """Generalized Hommel on the quantile grid ``lambdas`` = (0, l_1, ..., l_M)."""
    rule = RuleSpec("generalized_hommel", "exact" if exact else "closed",
                    lambdas=tuple(lambdas), method=method or "closed", iters=iters)
    return _merge(rule, p)


def twice_average(p):
    return _merge(RuleSpec("average"), p)


def harmonic(p, improved=False):
    """(T_K + 1) H(p), or the improved minimum over the m smallest values."""
    return _merge(RuleSpec("harmonic", "improved" if improved else "plain"), p)


def geometric(p, improved=False):
    """e G(p), or the improved minimum over the m smallest values."""
    return _merge(RuleSpec("geometric", "improved" if improved else "plain"), p)


def generalized_mean(p, r):
    """a_{r,K} M_r(p)."""
    return _merge(RuleSpec("generalized_mean", r=float(r)), p)


def fisher(p):
    return _merge(RuleSpec("fisher"), p)


def simes(p):
    return _merge(RuleSpec("simes"), p)


__all__ = ["bonferroni", "ruger", "median", "hommel", "generalized_hommel", "twice_average",
           "harmonic", "geometric", "generalized_mean", "fisher", "simes", "median_k"]
