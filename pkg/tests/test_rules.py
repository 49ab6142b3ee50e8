import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracle
from conftest import pvectors
from frozen_values import FROZEN
from pmerge import ParameterError, RuleSpec, dual_condition, merge, merge_rows
from pmerge.core import split_rules
from pmerge.rules import catalog, uses_solver

ALL = [r.label for r in catalog()]


@pytest.mark.parametrize("label,p,u,want", FROZEN, ids=[f"{e[0]}-{len(e[1])}" for e in FROZEN])
def test_frozen_oracle_values(label, p, u, want):
    got = merge(label, p, u=u).value
    # closed forms: a few ulps; solver rules: upper endpoint within 2^-50
    assert want - 1e-15 <= got <= want + 2.0 ** -50 + 2e-15


@given(pvectors(2, 4), st.sampled_from(oracle.FROZEN_LABELS), st.floats(0.05, 1.0))
def test_live_oracle(p, label, u):
    kw = oracle.parse_label(label)
    rand = kw["kind"] in ("u", "exu")
    want = oracle.rule_value(p=tuple(p), u=u if rand else 1, **kw)
    got = merge(label, p, u=u if rand else None).value
    assert abs(got - want) <= 2.0 ** -49 + 1e-14 * want


def test_labels_round_trip():
    for r in catalog(("batch", "ex", "u", "exu", "baseline")):
        assert RuleSpec.parse(r.label) == r
    r = RuleSpec("generalized_hommel", "exact", lambdas=(0, 0.25, 1), method="bisect", iters=30)
    assert RuleSpec.parse(r.label) == r
    assert r.label == "generalized_hommel[exact,lambda=0/0.25/1,method=bisect,iters=30]"


def test_split_rules():
    assert split_rules("a[x,r=2];b,c[k=1]") == ["a[x,r=2]", "b", "c[k=1]"]


@pytest.mark.parametrize("bad", [
    "nope", "ruger", "ruger[k=0]", "average[k=2]", "ex_fisher", "u_bonferroni",
    "average[tight]", "generalized_mean", "generalized_mean[r=0]", "hommel[method=fast]",
    "hommel[iters=0]", "average[r=x]",
])
def test_rejects_bad_labels(bad):
    with pytest.raises(ParameterError):
        RuleSpec.parse(bad)


def test_dual_condition_unavailable():
    for label in ("hommel[classical]", "u_average[wang]", "fisher",
                  "generalized_hommel[closed,lambda=0/0.5/1]"):
        with pytest.raises(ParameterError):
            dual_condition(RuleSpec.parse(label), 4)


def test_result_metadata():
    r = merge("ex_hommel", [0.1, 0.1])
    assert r.method == "bisection" and r.error_bound == 2.0 ** -50 and r.K == 2
    r = merge("average", [0.1, 0.2, 0.3])
    assert r.method == "closed_form" and r.error_bound == 0.0 and r.realized_u is None
    r = merge("u_average", [0.1, 0.2, 0.6], u=0.5)
    assert r.realized_u == 0.5
    r = merge("ex_hommel[method=exact]", [0.1, 0.1])
    assert r.method == "breakpoint" and r.error_bound == 0.0
    d = merge("ex_harmonic", [0.1, 0.2], K=5).to_dict()
    assert d["k_max"] == 5 and d["K"] == 2


def test_argument_errors():
    with pytest.raises(ParameterError):
        merge("u_average", [0.1, 0.2])
    with pytest.raises(ParameterError):
        merge("average", [0.1, 0.2], u=0.5)
    with pytest.raises(ParameterError):
        merge("average", [0.1, 0.2], K=4)
    with pytest.raises(ParameterError):
        merge("ex_average", [0.1, 0.2, 0.3], K=2)
    with pytest.raises(ParameterError):
        merge_rows("u_average", np.full((2, 3), 0.2), [0.5, 1.5])


@given(pvectors(1, 6, allow_zero=True), st.floats(0.0, 1.0))
def test_values_in_unit_interval(p, u):
    for label in ALL:
        R = RuleSpec.parse(label)
        if p.size == 1 and R.family in ("harmonic",) and (R.exchangeable or R.randomized):
            continue
        if p.size == 1 and R.family == "generalized_mean" and R.r < 0:
            continue
        val = merge_rows(R, p[None], [u] if R.randomized else None)[0]
        assert 0.0 <= val <= 1.0, label


@given(pvectors(2, 6), st.integers(1, 6))
def test_homogeneity_all_rules(p, j):
    g = 2.0 ** -j
    for label in ALL:
        R = RuleSpec.parse(label)
        U = [0.6] if R.randomized else None
        a = merge_rows(R, p[None], U)[0]
        b = merge_rows(R, (g * p)[None], U)[0]
        if a >= 1.0:
            continue
        tol = 2.0 ** -48 if uses_solver(R) else 1e-13 * a
        assert b == pytest.approx(g * a, abs=tol), label


def test_zero_pvalue_conventions():
    # mean-type forms with a finite value at 0 have no short cut
    finite_at_zero = {"average", "u_average[simple]", "u_average[wang]",
                      "generalized_mean[r=2]", "u_generalized_mean[simple,r=2]",
                      "u_generalized_mean[tight,r=2]"}
    for label in ALL:
        if label in finite_at_zero:
            continue
        R = RuleSpec.parse(label)
        val = merge_rows(R, np.array([[0.0, 0.5, 0.9]]), [0.7] if R.randomized else None)[0]
        assert val <= 2.0 ** -49, label
