"""Uniformly randomized p-merging functions.

Each rule takes an extra u in [0, 1], independent of the p-values. With u
drawn uniformly the result is a valid p-value; u = 1 gives back the
deterministic rule. At u = 0 every dual-form rule returns 0 (the condition
holds for every alpha), the Wang variant excepted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .batch import (geometric_simple_rows, geometric_sorted_rows, gm_simple_rows,
                    harmonic_simple_rows, harmonic_sorted_rows, mean_simple_rows, as_u)
from .calibrators import CalibratorSpec, harmonic_threshold
from .core import ParameterError, RuleSpec, as_pvec, cap, check_k, order_stats
from .solver import DualCondition, bisect_rows

SOURCE_MODES = ("explicit", "seeded", "first_pvalue")


@dataclass
class RandSource:
    """Where the randomization u comes from.

    explicit: a given u. seeded: one uniform on (0, 1] per merge, from
    ``default_rng(seed)`` (replayable) or from a caller-owned generator.
    first_pvalue: u is p_1 and the rule merges the remaining values; the
    caller must acknowledge that p_1 is independent of the others.
    """

    mode: str = "explicit"
    u: Optional[float] = None
    seed: Optional[int] = None
    rng: Optional[np.random.Generator] = None
    acknowledge_independence: bool = False

    def __post_init__(self):
        if self.mode not in SOURCE_MODES:
            raise ParameterError(f"u source must be one of {SOURCE_MODES}")
        if self.mode == "explicit":
            if self.u is None or not 0.0 <= float(self.u) <= 1.0:
                raise ParameterError(f"u must lie in [0, 1], got {self.u!r}")
        elif self.mode == "seeded":
            if (self.seed is None) == (self.rng is None):
                raise ParameterError("seeded u source needs exactly one of seed or rng")
        elif not self.acknowledge_independence:
            raise ParameterError(
                "first_pvalue randomization is valid only if p_1 is independent of the rest; "
                "pass acknowledge_independence=True")

    @classmethod
    def explicit(cls, u):
        return cls("explicit", u=float(u))

    @classmethod
    def seeded(cls, seed=None, rng=None):
        return cls("seeded", seed=seed, rng=rng)

    @classmethod
    def first_pvalue(cls, acknowledge_independence=False):
        return cls("first_pvalue", acknowledge_independence=acknowledge_independence)

    def draw(self, p: np.ndarray):
        """Return (u, p-values to merge)."""
        if self.mode == "explicit":
            return float(self.u), p
        if self.mode == "seeded":
            gen = self.rng if self.rng is not None else np.random.default_rng(self.seed)
            return 1.0 - float(gen.random()), p
        if p.size < 2:
            raise ParameterError("first_pvalue randomization needs at least two p-values")
        return float(p[0]), p[1:]


def resolve_u(u: Union[float, RandSource, None], p: np.ndarray):
    if u is None:
        raise ParameterError("randomized rules need u (a number or a RandSource)")
    if not isinstance(u, RandSource):
        u = RandSource.explicit(u)
    return u.draw(p)


def _zero_u(out, U):
    out[U == 0] = 0.0
    return out


# -- row functions (P is (n, K), U has n entries)


def ur_ruger_rows(P, U, k):
    K = P.shape[1]
    k = check_k(k, K)
    U = as_u(U, P.shape[0])
    S = order_stats(P)
    idx = np.maximum(np.ceil(U * k).astype(np.intp), 1)
    out = K / k * S[np.arange(P.shape[0]), idx - 1]
    out[S[:, 0] == 0] = 0.0
    return _zero_u(cap(out), U)


def ua_rows(P, U, variant="tight"):
    U = as_u(U, P.shape[0])
    if variant == "simple":
        return _zero_u(mean_simple_rows(P, U), U)
    if variant == "wang":
        with np.errstate(divide="ignore"):
            return cap(P.mean(axis=1) / (2.0 - 2.0 * U))
    K = P.shape[1]
    m = np.arange(1, K + 1, dtype=float)
    S = order_stats(P)
    den = 2.0 * m - (K * U)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(den > 0, 2.0 * np.cumsum(S, axis=1) / den, np.inf)
    out = cap(terms.min(axis=1))
    out[S[:, 0] == 0] = 0.0
    return _zero_u(out, U)


def _need_k2(K):
    if K < 2:
        raise ParameterError("randomized harmonic rules need K >= 2")


def uh_rows(P, U, variant="tight"):
    _need_k2(P.shape[1])
    T = harmonic_threshold(P.shape[1])
    U = as_u(U, P.shape[0])
    fn = harmonic_simple_rows if variant == "simple" else harmonic_sorted_rows
    return _zero_u(fn(P, U, T), U)


def ug_rows(P, U, variant="tight"):
    U = as_u(U, P.shape[0])
    fn = geometric_simple_rows if variant == "simple" else geometric_sorted_rows
    return _zero_u(fn(P, U), U)


def u_hommel_rows(P, U, iters=50):
    U = as_u(U, P.shape[0])
    cond = DualCondition(CalibratorSpec.grid_harmonic(P.shape[1]), "batch_threshold")
    return _zero_u(bisect_rows(cond, P, U, iters), U)


def u_generalized_mean_rows(P, U, r, variant="tight", iters=50):
    U = as_u(U, P.shape[0])
    cal = CalibratorSpec.generalized_mean(r, P.shape[1])
    if variant == "simple":
        return _zero_u(gm_simple_rows(P, U, r, cal.T), U)
    return _zero_u(bisect_rows(DualCondition(cal, "batch_threshold"), P, U, iters), U)


def randomized_ex_rows(cal: CalibratorSpec, P, U, iters=50):
    """Bisection on: f(p_1/alpha) >= u, or some prefix average of f(p_i/alpha) >= 1."""
    U = as_u(U, P.shape[0])
    return _zero_u(bisect_rows(DualCondition(cal, "ex_or_rand"), P, U, iters), U)


# -- public single-vector API


def _merge(rule, p, u, **kw):
    from .rules import merge

    return merge(rule, p, u=u, **kw)


def ur_ruger(p, k, u):
    """(K/k) p_(ceil(u k)); an explicit u = 0 is rejected since index 0 does not exist."""
    explicit_u = u.u if isinstance(u, RandSource) and u.mode == "explicit" else u
    if not isinstance(explicit_u, RandSource) and float(explicit_u) == 0.0:
        raise ParameterError("ur_ruger needs u in (0, 1]")
    return _merge(RuleSpec("ruger", k=k, randomized=True), p, u)


def u_median(p, u):
    return _merge(RuleSpec("median", randomized=True), p, u)


def ua(p, u, variant="tight"):
    return _merge(RuleSpec("average", variant, randomized=True), p, u)


def uh(p, u, variant="tight"):
    return _merge(RuleSpec("harmonic", variant, randomized=True), p, u)


def ug(p, u, variant="tight"):
    return _merge(RuleSpec("geometric", variant, randomized=True), p, u)


def u_hommel(p, u, iters=50, method=None):
    return _merge(RuleSpec("hommel", randomized=True, iters=iters, method=method or "closed"),
                  p, u)


def u_generalized_mean(p, r, u, variant="tight", iters=50):
    return _merge(RuleSpec("generalized_mean", variant, randomized=True, r=float(r),
                           iters=iters), p, u)


def randomized_ex(cal: CalibratorSpec, p, u, iters: int = 50):
    """Exchangeable and randomized merge of ``p`` through calibrator ``cal``.

    Returns a bare :class:`MergedP` with ``rule=None`` since any calibrator
    is accepted; use ``exu_*`` rule labels for the registered families.
    """
    from .core import MergedP

    p = as_pvec(p)
    uval, p = resolve_u(u, p)
    v = float(randomized_ex_rows(cal, p[None, :], [uval], iters)[0])
    return MergedP(v, None, "bisection", 2.0 ** -iters, realized_u=uval, K=p.size)


__all__ = ["RandSource", "ur_ruger", "u_median", "ua", "uh", "ug", "u_hommel",
           "u_generalized_mean", "randomized_ex", "resolve_u"]
