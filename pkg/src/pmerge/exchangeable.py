"""Ex-p-merging functions: valid when the p-values are exchangeable under the null.

These rules depend on the order of the inputs. Each one is the minimum over
prefixes of a batch-style value, which is what makes the sequential stream
combiner below work.
"""
from __future__ import annotations

import bisect as _bisect
import math
from typing import Optional

import numpy as np

from . import kernels
from .calibrators import CalibratorSpec, harmonic_threshold
from .core import MergedP, ParameterError, RuleSpec, as_pvec, cap, check_k
from .solver import DualCondition, bisect_rows


def _errstate():
    return np.errstate(divide="ignore", invalid="ignore", over="ignore")


def _prefix_len(P):
    return np.arange(1, P.shape[1] + 1, dtype=float)


def _need_k2(name, K):
    if K < 2:
        raise ParameterError(f"{name} needs K >= 2; pass K explicitly for single values")


# -- row functions; K overrides the number of p-values used for constants


def ex_ruger_rows(P, k, K=None):
    K = P.shape[1] if K is None else K
    k = check_k(k, K)
    return cap(K / k * kernels.ex_quantile_min(P, k, K))


def ex_average_rows(P, variant="tight"):
    if variant == "simple":
        return cap(2.0 * (np.cumsum(P, axis=1) / _prefix_len(P)).min(axis=1))
    return cap(kernels.ex_tight(P, kernels.TIGHT_ARITHMETIC, 0.0))


def ex_harmonic_rows(P, variant="tight", K=None):
    K = P.shape[1] if K is None else K
    _need_k2("ex_harmonic", K)
    T = harmonic_threshold(K)
    if variant == "simple":
        with _errstate():
            H = _prefix_len(P) / np.cumsum(1.0 / P, axis=1)
        return cap((T + 1.0) * H.min(axis=1))
    return cap(kernels.ex_tight(P, kernels.TIGHT_HARMONIC, T))


def ex_geometric_rows(P, variant="tight"):
    if variant == "simple":
        with _errstate():
            G = np.exp(np.cumsum(np.log(P), axis=1) / _prefix_len(P))
        return cap(math.e * G.min(axis=1))
    return cap(kernels.ex_tight(P, kernels.TIGHT_GEOMETRIC, 0.0))


def ex_hommel_rows(P, K=None, iters=50):
    K = P.shape[1] if K is None else K
    return bisect_rows(DualCondition(CalibratorSpec.grid_harmonic(K)), P, None, iters)


def _gm_cal(r, K):
    return CalibratorSpec.generalized_mean(r, K)


def ex_generalized_mean_rows(P, r, variant="tight", K=None, iters=50):
    K = P.shape[1] if K is None else K
    cal = _gm_cal(r, K)
    if variant == "simple":
        M = _prefix_power_means(P, r)
        return cap(M.min(axis=1) / (1.0 - cal.T / r) ** (1.0 / r))
    return bisect_rows(DualCondition(cal), P, None, iters)


def _prefix_power_means(P, r):
    with _errstate():
        return np.power(np.cumsum(np.power(P, r), axis=1) / _prefix_len(P), 1.0 / r)


# -- public single-vector API


def _merge(rule, p, **kw):
    from .rules import merge

    return merge(rule, p, **kw)


def ex_ruger(p, k, K=None):
    """(K/k) times the minimum over prefixes l of the ceil(l k / K)-th smallest of the first l values."""
    return _merge(RuleSpec("ruger", k=k, exchangeable=True), p, K=K)


def ex_median(p, K=None):
    return _merge(RuleSpec("median", exchangeable=True), p, K=K)


def ex_average(p, variant="tight"):
    return _merge(RuleSpec("average", variant, exchangeable=True), p)


def ex_harmonic(p, variant="tight", K=None):
    return _merge(RuleSpec("harmonic", variant, exchangeable=True), p, K=K)


def ex_geometric(p, variant="tight"):
    return _merge(RuleSpec("geometric", variant, exchangeable=True), p)


def ex_hommel(p, K=None, iters=50, method=None):
    return _merge(RuleSpec("hommel", exchangeable=True, iters=iters,
                           method=method or "closed"), p, K=K)


def ex_generalized_mean(p, r, variant="tight", K=None, iters=50):
    return _merge(RuleSpec("generalized_mean", variant, exchangeable=True, r=float(r),
                           iters=iters), p, K=K)


def shuffle_then_merge(p, rule: RuleSpec, seed: int) -> MergedP:
    """Apply a seeded uniformly random permutation, then the exchangeable rule.

    The permutation makes any input vector exchangeable, so the result is a
    valid p-value under arbitrary dependence.
    """
    if not rule.exchangeable:
        raise ParameterError(f"{rule.label} is not an exchangeable rule")
    p = as_pvec(p)
    perm = np.random.default_rng(seed).permutation(p.size)
    res = _merge(rule, p[perm])
    extras = dict(res.extras, permutation=perm.tolist(), shuffle_seed=seed)
    return MergedP(res.value, res.rule, res.method, res.error_bound, res.realized_u,
                   res.K, res.k_max, extras)


# -- sequential combination


_K_DEPENDENT = {"bonferroni", "hommel", "harmonic", "ruger", "median", "generalized_mean"}


class ExchangeableStream:
    """Running ex-p-merged value over a growing sequence of p-values.

    The value after each push equals the batch rule on everything pushed so
    far and never increases, so stopping at any time is valid. Only the
    average and geometric families are free of K; every other rule fixes its
    constants from ``K_max`` at creation. Ruger-type rules (Bonferroni,
    median) keep the quantile level k/K_max and accept any number of pushes;
    the rest reject pushes beyond ``K_max``.
    """

    def __init__(self, rule: RuleSpec, K_max: Optional[int] = None):
        if not rule.exchangeable or rule.randomized:
            raise ParameterError(f"{rule.label} is not a deterministic exchangeable rule")
        fam = rule.family
        if fam in _K_DEPENDENT and K_max is None:
            raise ParameterError(f"a {rule.name} stream needs K_max")
        if K_max is not None and (int(K_max) != K_max or K_max < 1):
            raise ParameterError("K_max must be a positive integer")
        self.rule = rule
        self.K_max = None if K_max is None else int(K_max)
        self.bounded = fam in ("hommel", "harmonic", "generalized_mean")
        self.buffer: list = []
        self._sorted: list = []
        self._best = math.inf
        self._acc = 0.0
        self._zero = False
        self._current: Optional[MergedP] = None
        if fam == "harmonic":
            _need_k2("ex_harmonic stream", self.K_max)
            self._T = harmonic_threshold(self.K_max)
        elif fam == "generalized_mean":
            self._gm = _gm_cal(rule.r, self.K_max)
        elif fam in ("ruger", "median"):
            self._k = check_k(rule.k if fam == "ruger" else (self.K_max + 1) // 2, self.K_max)
        elif fam == "bonferroni":
            self._k = 1

    @property
    def count(self) -> int:
        return len(self.buffer)

    def _constant_K(self):
        return self.K_max if self.K_max is not None else self.count

    def push(self, p: float) -> "ExchangeableStream":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"stream p-values must lie in [0, 1], got {p!r}")
        if self.bounded and self.count >= self.K_max:
            raise ParameterError(f"stream is limited to K_max={self.K_max} values")
        self.buffer.append(p)
        _bisect.insort(self._sorted, p)
        self._zero = self._zero or p == 0.0
        value, method, err = self._update(p)
        self._current = MergedP(float(value), self.rule, method, err, K=self.count,
                                k_max=self.K_max)
        return self

    def _update(self, p):
        rule, fam, ell = self.rule, self.rule.family, self.count
        var = rule.variant
        if rule.method != "closed" or fam == "hommel" or (fam == "generalized_mean" and var == "tight"):
            res = _merge(rule, self.buffer, K=self._constant_K())
            return res.value, res.method, res.error_bound
        with _errstate():
            if fam in ("ruger", "median", "bonferroni"):
                K = self.K_max
                idx = (ell * self._k + K - 1) // K
                self._best = min(self._best, self._sorted[idx - 1])
                v = 0.0 if self._zero else K / self._k * self._best
            elif var == "simple":
                if fam == "average":
                    self._acc += p
                    self._best = min(self._best, self._acc / ell)
                    v = 2.0 * self._best
                elif fam == "harmonic":
                    self._acc += np.float64(1.0) / np.float64(p)
                    self._best = min(self._best, ell / self._acc)
                    v = (self._T + 1.0) * self._best
                elif fam == "geometric":
                    self._acc += float(np.log(np.float64(p)))
                    self._best = min(self._best, float(np.exp(np.float64(self._acc / ell))))
                    v = math.e * self._best
                else:  # generalized_mean
                    r = rule.r
                    self._acc += float(np.power(np.float64(p), r))
                    self._best = min(self._best, float(np.power(np.float64(self._acc / ell), 1.0 / r)))
                    v = self._best / (1.0 - self._gm.T / r) ** (1.0 / r)
            else:  # tight: recompute the new row over the sorted prefix
                S = np.asarray(self._sorted)
                m = np.arange(1, ell + 1, dtype=float)
                if fam == "average":
                    den = 2.0 * m - ell
                    terms = np.where(den > 0, 2.0 * np.cumsum(S) / den, np.inf)
                elif fam == "harmonic":
                    terms = (ell * self._T + m) / np.cumsum(1.0 / S)
                else:
                    terms = np.exp(ell / m + np.cumsum(np.log(S)) / m)
                self._best = min(self._best, float(terms.min()))
                v = 0.0 if (fam == "average" and self._zero) else self._best
        return min(float(v), 1.0), "closed_form", 0.0

    @property
    def current(self) -> MergedP:
        if self._current is None:
            raise ParameterError("no p-values pushed yet")
        return self._current


def stream_new(rule: RuleSpec, K_max: Optional[int] = None) -> ExchangeableStream:
    return ExchangeableStream(rule, K_max)


def stream_push(s: ExchangeableStream, p: float) -> ExchangeableStream:
    return s.push(p)


def stream_current(s: ExchangeableStream) -> MergedP:
    return s.current
