"""Dual-form evaluation of merging rules from their calibrator.

``bisect`` is the general route (upper bisection endpoint after B halvings
of [0, 1]); ``breakpoint_exact`` returns the exact infimum for the
piecewise-constant calibrators using rational arithmetic on the inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _pykernels, kernels
from .calibrators import CalibratorSpec, Family
from .core import MergedP, ParameterError, RuleSpec, as_pmatrix, as_pvec

MODES = ("prefix_max", "batch_threshold", "ex_or_rand")
_MODE_CODES = {"prefix_max": kernels.PREFIX_MAX, "batch_threshold": kernels.BATCH_THRESHOLD,
               "ex_or_rand": kernels.EX_OR_RAND}
DEFAULT_ITERS = 50


@dataclass(frozen=True)
class DualCondition:
    """Condition whose infimum over alpha in (0, 1) defines a rule.

    prefix_max: some prefix average of f(p_i/alpha) reaches 1.
    batch_threshold: the full average reaches u.
    ex_or_rand: f(p_1/alpha) >= u, or the prefix_max condition.
    ``raw`` uses the calibrator formula without positive part or cap, which
    generates the "simple" closed forms.
    """

    cal: CalibratorSpec
    mode: str = "prefix_max"
    u: float = 1.0
    raw: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.u <= 1.0:
            raise ParameterError(f"threshold u must lie in [0, 1], got {self.u!r}")
        if self.raw and self.cal.family not in (Family.ARITHMETIC, Family.HARMONIC,
                                                Family.GEOMETRIC, Family.GENERALIZED_MEAN):
            raise ParameterError("raw evaluation applies to the smooth families only")

    def holds(self, p, alpha: float) -> bool:
        """Evaluate the condition at one alpha in (0, 1), in the same long double
        arithmetic as the bisection kernels."""
        p = as_pvec(p)
        code, K, k, h, T, r, lam = self.cal.kernel_args()
        x = p.astype(np.longdouble) / np.longdouble(alpha)
        f = _pykernels._calibrate_ld(code, self.raw, x, K, k, h, T, r, lam)
        cs = np.cumsum(f)
        if self.mode == "batch_threshold":
            return bool(cs[-1] >= np.longdouble(self.u) * p.size)
        ok = bool((cs >= np.arange(1, p.size + 1)).any())
        return ok or (self.mode == "ex_or_rand" and bool(f[0] >= np.longdouble(self.u)))


def _check_iters(B):
    if int(B) != B or B < 1:
        raise ParameterError(f"iteration count must be a positive integer, got {B!r}")
    return int(B)


def bisect_rows(cond: DualCondition, P, U=None, B: int = DEFAULT_ITERS) -> np.ndarray:
    """Bisection for every row of ``P``; ``U`` optionally gives a per-row threshold."""
    B = _check_iters(B)
    P = as_pmatrix(P)
    code, K, k, h, T, r, lam = cond.cal.kernel_args()
    U = cond.u if U is None else U
    return kernels.bisect_rows(P, U, code, cond.raw, _MODE_CODES[cond.mode],
                               K, k, h, T, r, lam, B)


def bisect(cond: DualCondition, p, B: int = DEFAULT_ITERS,
           rule: Optional[RuleSpec] = None) -> MergedP:
    """Algorithm-1 bisection: true infimum <= value <= true infimum + 2**-B."""
    p = as_pvec(p)
    v = float(bisect_rows(cond, p[None, :], None, B)[0])
    return MergedP(v, rule, "bisection", 2.0 ** -_check_iters(B), K=p.size)


# --------------------------------------------------------------------------
# exact evaluation for piecewise-constant calibrators


def _harmonic_fraction(K):
    return sum((Fraction(1, j) for j in range(1, K + 1)), Fraction(0))


class _StepCalibrator:
    """f(x) = g(s*x) with g a left-continuous step function on (0, y_max]."""

    def __init__(self, cal: CalibratorSpec):
        fam, K = cal.family, cal.K
        self.integer_jumps = fam is Family.GRID_HARMONIC
        if fam is Family.RUGER:
            self.scale = Fraction(K, cal.k)
            self.jumps = [Fraction(1)]
            self.values = [Fraction(K, cal.k)]
            self.at_zero = math.inf
        elif fam is Family.GRID_HARMONIC:
            self.scale = K * _harmonic_fraction(K)
            self.jumps = [Fraction(j) for j in range(1, K + 1)]
            self.values = [Fraction(K, j) for j in range(1, K + 1)]
            self.at_zero = Fraction(K)
        elif fam is Family.GENERALIZED_GRID:
            lam = [Fraction(x) for x in cal.lambdas]
            self.scale = sum(((lam[j] - lam[j - 1]) / lam[j] for j in range(1, len(lam))),
                             Fraction(0))
            self.jumps = lam[1:]
            self.values = [1 / x for x in lam[1:]]
            self.at_zero = math.inf
        else:
            raise ParameterError(
                f"exact evaluation supports ruger, grid_harmonic and generalized_grid, not {fam.value}")

    def value(self, y: Fraction):
        if y == 0:
            return self.at_zero
        if y > self.jumps[-1]:
            return Fraction(0)
        if self.integer_jumps:
            return self.values[math.ceil(y) - 1]
        for yj, v in zip(self.jumps, self.values):
            if y <= yj:
                return v
        return Fraction(0)


def _holds_exact(step, cond, pf, alpha):
    vals = [step.value(step.scale * x / alpha) for x in pf]
    if cond.mode == "batch_threshold":
        return sum(vals) >= Fraction(cond.u) * len(pf)
    if cond.mode == "ex_or_rand" and vals[0] >= Fraction(cond.u):
        return True
    s = 0
    for ell, v in enumerate(vals, 1):
        s += v
        if s >= ell:
            return True
    return False


def breakpoint_exact(cond: DualCondition, p, rule: Optional[RuleSpec] = None) -> MergedP:
    """Exact infimum by searching the finite set of alphas where some term jumps.

    Candidates are alpha = s * p_i / y_j for each jump y_j of the scaled step
    function. Inputs are converted to exact rationals and the returned float
    is rounded upward, so it never falls below the true infimum.
    """
    p = as_pvec(p)
    if cond.raw:
        raise ParameterError("exact evaluation has no raw form")
    step = _StepCalibrator(cond.cal)
    pf = [Fraction(float(x)) for x in p]
    cands = sorted({step.scale * x / yj for x in pf if x > 0 for yj in step.jumps})
    cands = [a for a in cands if a < 1]

    def result(a):
        v = float(a)
        if Fraction(v) < a:
            v = math.nextafter(v, math.inf)
        return MergedP(min(v, 1.0), rule, "breakpoint", 0.0, K=p.size)

    below = cands[0] / 2 if cands else Fraction(1, 2)
    if _holds_exact(step, cond, pf, below):
        return result(Fraction(0))
    lo, hi = 0, len(cands)  # first index whose candidate satisfies the condition
    while lo < hi:
        mid = (lo + hi) // 2
        if _holds_exact(step, cond, pf, cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return result(cands[lo]) if lo < len(cands) else result(Fraction(1))
