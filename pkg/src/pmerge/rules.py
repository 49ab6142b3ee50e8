"""Dispatch from a :class:`RuleSpec` to its row function or its dual form."""
from __future__ import annotations

from typing import Optional, Union

import numpy as np

from . import batch as _b
from . import exchangeable as _e
from . import randomized as _r
from .calibrators import CalibratorSpec
from .core import MergedP, ParameterError, RuleSpec, as_pmatrix, as_pvec
from .randomized import RandSource, resolve_u
from .solver import DualCondition, bisect_rows, breakpoint_exact

_SMOOTH = ("average", "harmonic", "geometric", "generalized_mean")


def _rule(rule) -> RuleSpec:
    return RuleSpec.parse(rule) if isinstance(rule, str) else rule


def uses_solver(rule: RuleSpec) -> bool:
    """True when the default ("closed") method still goes through bisection."""
    fam, var = rule.family, rule.variant
    if rule.method != "closed":
        return rule.method == "bisect"
    if rule.exchangeable and rule.randomized:
        return True
    if rule.exchangeable or rule.randomized:
        return fam == "hommel" or (fam == "generalized_mean" and var == "tight")
    return var == "exact"


def calibrator_for(rule: RuleSpec, K: int) -> CalibratorSpec:
    """The calibrator whose dual form generates ``rule`` for K p-values."""
    fam = rule.family
    if fam == "bonferroni":
        return CalibratorSpec.ruger(K, 1)
    if fam == "ruger":
        return CalibratorSpec.ruger(K, rule.k)
    if fam == "median":
        return CalibratorSpec.ruger(K, _b.median_k(K))
    if fam == "hommel":
        if rule.variant == "classical":
            raise ParameterError("classical Hommel has no dual form; use hommel[exact]")
        return CalibratorSpec.grid_harmonic(K)
    if fam == "generalized_hommel":
        if rule.variant == "closed":
            raise ParameterError("the closed generalized Hommel form has no dual form; "
                                 "use generalized_hommel[exact]")
        return CalibratorSpec.generalized_grid(rule.lambdas, K)
    if fam == "average":
        if rule.variant == "wang":
            raise ParameterError("the Wang variant has no dual form")
        return CalibratorSpec.arithmetic(K)
    if fam == "harmonic":
        return CalibratorSpec.harmonic(K)
    if fam == "geometric":
        return CalibratorSpec.geometric(K)
    if fam == "generalized_mean":
        return CalibratorSpec.generalized_mean(rule.r, K)
    raise ParameterError(f"{fam} is not a calibrator-based rule")


def dual_condition(rule: RuleSpec, K: int, u: float = 1.0) -> DualCondition:
    """Condition whose infimum is ``rule`` (batch/u: full average, ex: prefixes)."""
    rule = _rule(rule)
    cal = calibrator_for(rule, K)
    if rule.exchangeable:
        mode = "ex_or_rand" if rule.randomized else "prefix_max"
    else:
        mode = "batch_threshold"
    raw = rule.family in _SMOOTH and not (rule.exchangeable and rule.randomized) and (
        rule.variant in ("simple", "plain")
        or (not rule.exchangeable and not rule.randomized
            and rule.family in ("average", "generalized_mean")))
    return DualCondition(cal, mode, u if rule.randomized else 1.0, raw)


def _exu_rows(rule, P, U, K):
    return _r.randomized_ex_rows(calibrator_for(rule, K), P, U, rule.iters)


def _closed_rows(rule: RuleSpec, P, U, K):
    fam, var, it = rule.family, rule.variant, rule.iters
    n, L = P.shape
    if rule.exchangeable and rule.randomized:
        return _exu_rows(rule, P, U, K)
    if rule.exchangeable:
        if fam in ("bonferroni", "ruger", "median"):
            k = {"bonferroni": 1, "ruger": rule.k}.get(fam) or _b.median_k(K)
            return _e.ex_ruger_rows(P, k, K)
        if fam == "average":
            return _e.ex_average_rows(P, var)
        if fam == "harmonic":
            return _e.ex_harmonic_rows(P, var, K)
        if fam == "geometric":
            return _e.ex_geometric_rows(P, var)
        if fam == "hommel":
            return _e.ex_hommel_rows(P, K, it)
        return _e.ex_generalized_mean_rows(P, rule.r, var, K, it)
    if rule.randomized:
        if fam in ("ruger", "median"):
            return _r.ur_ruger_rows(P, U, rule.k if fam == "ruger" else _b.median_k(L))
        if fam == "average":
            return _r.ua_rows(P, U, var)
        if fam == "harmonic":
            return _r.uh_rows(P, U, var)
        if fam == "geometric":
            return _r.ug_rows(P, U, var)
        if fam == "hommel":
            return _r.u_hommel_rows(P, U, it)
        return _r.u_generalized_mean_rows(P, U, rule.r, var, it)
    if L == 1 and fam not in ("fisher", "simes"):
        return np.minimum(P[:, 0].copy(), 1.0)
    if fam == "bonferroni":
        return _b.bonferroni_rows(P)
    if fam in ("ruger", "median"):
        return _b.ruger_rows(P, rule.k if fam == "ruger" else _b.median_k(L))
    if fam == "hommel":
        if var == "classical":
            return _b.hommel_rows(P)
        return bisect_rows(dual_condition(rule, L), P, None, it)
    if fam == "generalized_hommel":
        if var == "closed":
            return _b.generalized_hommel_rows(P, rule.lambdas)
        return bisect_rows(dual_condition(rule, L), P, None, it)
    if fam == "average":
        return _b.twice_average_rows(P)
    if fam == "harmonic":
        return _b.harmonic_rows(P, var)
    if fam == "geometric":
        return _b.geometric_rows(P, var)
    if fam == "generalized_mean":
        return _b.generalized_mean_rows(P, rule.r)
    if fam == "fisher":
        return _b.fisher_rows(P)
    return _b.simes_rows(P)


def _effective_K(rule, L, K):
    if K is None or K == L:
        return L
    if not rule.exchangeable:
        raise ParameterError("a K override applies to exchangeable rules only")
    if int(K) != K or K < L:
        raise ParameterError(f"K override must be an integer >= {L}, got {K!r}")
    return int(K)


def merge_rows(rule: Union[RuleSpec, str], P, U=None, K: Optional[int] = None) -> np.ndarray:
    """Merged values for each row of ``P`` (``U`` gives per-row u for randomized rules)."""
    rule = _rule(rule)
    P = as_pmatrix(P)
    n, L = P.shape
    Keff = _effective_K(rule, L, K)
    if rule.randomized:
        if U is None:
            raise ParameterError(f"{rule.label} needs u")
        U = _b.as_u(U, n)
        if ((U < 0) | (U > 1)).any() or np.isnan(U).any():
            raise ParameterError("u must lie in [0, 1]")
    elif U is not None:
        raise ParameterError(f"{rule.label} is not randomized")
    if rule.method == "closed":
        return _closed_rows(rule, P, U, Keff)
    if L == 1 and not rule.exchangeable and not rule.randomized:
        return np.minimum(P[:, 0].copy(), 1.0)
    if rule.method == "bisect":
        out = bisect_rows(dual_condition(rule, Keff), P, U, rule.iters)
    else:
        Ui = np.ones(n) if U is None else U
        out = np.array([breakpoint_exact(dual_condition(rule, Keff, float(Ui[i])), P[i]).value
                        for i in range(n)])
    if U is not None:
        out[U == 0] = 0.0
    return out


def merge(rule: Union[RuleSpec, str], p, u: Union[float, RandSource, None] = None,
          K: Optional[int] = None) -> MergedP:
    """Merge one p-value vector with ``rule``.

    Randomized rules take ``u`` as a number or a :class:`RandSource`;
    exchangeable rules accept ``K`` to fix their constants for a longer
    sequence than the one given (stream prefixes).
    """
    rule = _rule(rule)
    p = as_pvec(p)
    realized, extras = None, {}
    if rule.randomized:
        realized, p = resolve_u(u, p)
        if isinstance(u, RandSource):
            extras["u_source"] = u.mode
    elif u is not None:
        raise ParameterError(f"{rule.label} is not randomized")
    U = None if realized is None else np.array([realized])
    value = float(merge_rows(rule, p[None, :], U, K)[0])
    single_batch = p.size == 1 and not (rule.exchangeable or rule.randomized)
    if rule.method == "exact" and not single_batch:
        method, err = "breakpoint", 0.0
    elif uses_solver(rule) and not single_batch:
        method, err = "bisection", 2.0 ** -rule.iters
    else:
        method, err = "closed_form", 0.0
    return MergedP(value, rule, method, err, realized_u=realized, K=p.size,
                   k_max=K if K is not None and K != p.size else None, extras=extras)


# -- rule catalogs used by the simulation and validation suites

BATCH_RULES = (
    "bonferroni", "median", "hommel[classical]", "hommel[exact]",
    "average", "harmonic[plain]", "harmonic[improved]",
    "geometric[plain]", "geometric[improved]", "generalized_mean[r=2]",
    "generalized_mean[r=-2]",
)
EX_RULES = (
    "ex_bonferroni", "ex_median", "ex_hommel", "ex_average[tight]", "ex_average[simple]",
    "ex_harmonic[tight]", "ex_harmonic[simple]", "ex_geometric[tight]",
    "ex_geometric[simple]", "ex_generalized_mean[tight,r=2]",
    "ex_generalized_mean[simple,r=2]",
)
U_RULES = (
    "u_median", "u_hommel", "u_average[tight]", "u_average[simple]", "u_average[wang]",
    "u_harmonic[tight]", "u_harmonic[simple]", "u_geometric[tight]", "u_geometric[simple]",
    "u_generalized_mean[simple,r=2]", "u_generalized_mean[tight,r=2]",
)
EXU_RULES = ("exu_median", "exu_hommel", "exu_average", "exu_harmonic", "exu_geometric")
BASELINES = ("fisher", "simes")


def catalog(kinds=("batch", "ex", "u", "exu")) -> list:
    """Parsed rule lists by kind (baselines only when asked for by name)."""
    table = {"batch": BATCH_RULES, "ex": EX_RULES, "u": U_RULES, "exu": EXU_RULES,
             "baseline": BASELINES}
    return [RuleSpec.parse(s) for kind in kinds for s in table[kind]]
