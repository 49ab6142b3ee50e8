"""Spot checks behind ``pmerge validate``: calibrators plus rule invariants.

Each check yields ``(name, passed, detail)``. The full-size versions of
these checks live in the test suite; this one is sized to run in seconds.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .calibrators import CalibratorSpec, integral, quadrature, validate
from .core import NumericalError, ParameterError, RuleSpec
from .rules import catalog, merge_rows, uses_solver

R_GRID = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0)

DOMINATION_CHAINS = (
    ("ex_ruger[k=2]", "ruger[k=2]"),
    ("ex_average[tight]", "ex_average[simple]", "average"),
    ("ex_harmonic[tight]", "ex_harmonic[simple]", "harmonic[plain]"),
    ("ex_harmonic[tight]", "harmonic[improved]", "harmonic[plain]"),
    ("ex_geometric[tight]", "ex_geometric[simple]", "geometric[plain]"),
    ("geometric[improved]", "geometric[plain]"),
    ("ex_hommel", "hommel[exact]", "hommel[classical]"),
    ("ex_generalized_mean[tight,r=2]", "ex_generalized_mean[simple,r=2]", "generalized_mean[r=2]"),
    ("ex_generalized_mean[tight,r=-2]", "ex_generalized_mean[simple,r=-2]",
     "generalized_mean[r=-2]"),
)

U_REDUCTIONS = (
    ("u_ruger[k=2]", "ruger[k=2]"),
    ("u_average[simple]", "average"),
    ("u_harmonic[simple]", "harmonic[plain]"),
    ("u_harmonic[tight]", "harmonic[improved]"),
    ("u_geometric[simple]", "geometric[plain]"),
    ("u_geometric[tight]", "geometric[improved]"),
    ("u_hommel", "hommel[exact]"),
    ("u_generalized_mean[simple,r=2]", "generalized_mean[r=2]"),
)


def calibrator_specs(K):
    yield CalibratorSpec.ruger(K, max(1, K // 2))
    yield CalibratorSpec.grid_harmonic(K)
    yield CalibratorSpec.generalized_grid((0.0, 0.25, 0.5, 1.0), K)
    yield CalibratorSpec.arithmetic(K)
    yield CalibratorSpec.harmonic(K)
    yield CalibratorSpec.geometric(K)
    for r in R_GRID:
        yield CalibratorSpec.generalized_mean(r, K)


def _chain_slack(a, b):
    # closed forms computed along different float paths; solver values sit up to 2^-B above
    return 1e-13 * np.maximum(np.abs(a), np.abs(b)) + 2.0 ** -49


def random_pvalues(rng, n, K):
    """Test inputs skewed toward small values so merged p-values are not all capped."""
    return rng.random((n, K)) ** 3


def run_suite(k_max=20, samples=200, seed=0):
    rng = np.random.default_rng(seed)
    Ks = sorted({2, 3, 5, min(10, k_max), k_max})

    # calibrators
    for K in Ks:
        for spec in calibrator_specs(K):
            rep = validate(spec)
            name = f"calibrator {spec.family.value} K={K}" + (f" r={spec.r:g}" if spec.r else "")
            yield name, rep.passed, "" if rep.passed else str(rep)
            q, c = quadrature(spec), integral(spec)
            yield name + " integral", abs(q - c) <= 1e-8, f"closed {c:.12g} quadrature {q:.12g}"

    # harmonic constant
    try:
        bad = [K for K in range(4, 10001)
               if not CalibratorSpec.harmonic(K).T + 1.0 < math.e * math.log(K)]
        yield "T_K + 1 < e ln K for K in 4..10^4", not bad, f"fails at {bad[:5]}" if bad else ""
    except NumericalError as exc:
        yield "K T_K + 1 <= exp(T_K)", False, str(exc)

    for K in Ks:
        P = random_pvalues(rng, samples, K)
        U = rng.random(samples)

        for chain in DOMINATION_CHAINS:
            vals = []
            try:
                for label in chain:
                    vals.append(merge_rows(RuleSpec.parse(label), P))
            except ParameterError as exc:
                yield f"chain {' <= '.join(chain)} K={K}", False, str(exc)
                continue
            ok = all((lo <= hi + _chain_slack(lo, hi)).all() for lo, hi in zip(vals, vals[1:]))
            yield f"chain {' <= '.join(chain)} K={K}", ok, ""

        ones = np.ones(samples)
        for ulabel, blabel in U_REDUCTIONS:
            ur, br = RuleSpec.parse(ulabel), RuleSpec.parse(blabel)
            a, b = merge_rows(ur, P, ones), merge_rows(br, P)
            ok = np.array_equal(a, b)
            yield f"u=1 reduction {ulabel} = {blabel} K={K}", ok, \
                "" if ok else f"max diff {np.abs(a - b).max():.3g}"

        for rule in catalog():
            if uses_solver(rule) or rule.variant in ("wang", "classical"):
                continue
            Ur = U if rule.randomized else None
            a = merge_rows(rule, P, Ur)
            b = merge_rows(replace(rule, method="bisect"), P, Ur)
            d = float(np.abs(a - b).max())
            yield f"closed vs bisection {rule.label} K={K}", d <= 2.0 ** -49, f"max diff {d:.3g}"
