import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import pvectors
from pmerge import (ParameterError, bonferroni, fisher, generalized_hommel, generalized_mean,
                    geometric, harmonic, hommel, median, merge, merge_rows, ruger, simes,
                    twice_average)
from pmerge.calibrators import harmonic_threshold
from pmerge.rules import BATCH_RULES

T2 = harmonic_threshold(2)


def v(res):
    return res.value


class TestExamples:
    def test_bonferroni(self):
        assert v(bonferroni([0.01, 0.5, 0.9])) == pytest.approx(0.03)
        assert v(bonferroni([0.0, 0.5])) == 0.0
        assert v(bonferroni([0.6, 0.7])) == 1.0

    def test_ruger(self):
        assert v(ruger([0.5, 0.1, 0.4, 0.2], 2)) == pytest.approx(0.4)
        p = [0.3, 0.05, 0.9, 0.6]
        assert v(ruger(p, 1)) == v(bonferroni(p))
        assert v(ruger(p, 4)) == 0.9
        with pytest.raises(ParameterError):
            ruger(p, 5)
        with pytest.raises(ParameterError):
            ruger(p, 0)

    def test_median_preset(self):
        assert v(median([0.1, 0.2, 0.3, 0.4])) == pytest.approx(2 * 0.2)
        assert v(median([0.1, 0.2, 0.3])) == pytest.approx(1.5 * 0.2)

    def test_hommel(self):
        assert v(hommel([0.1, 0.1])) == pytest.approx(0.15)
        r = hommel([0.1, 0.5], exact=True)
        assert abs(r.value - 0.3) <= 2.0 ** -50
        assert r.method == "bisection" and r.error_bound == 2.0 ** -50
        r = hommel([0.1, 0.5], exact=True, method="exact")
        assert r.value == pytest.approx(0.3, abs=1e-16) and r.method == "breakpoint"

    def test_generalized_hommel(self):
        p = [0.02, 0.3, 0.5, 0.9]
        assert v(generalized_hommel(p, (0, 0.25, 0.5, 1))) == pytest.approx(0.16)
        K = len(p)
        grid = [0] + [j / K for j in range(1, K + 1)]
        assert v(generalized_hommel(p, grid)) == pytest.approx(v(hommel(p)))
        assert v(generalized_hommel(p, (0, 2 / 4))) == pytest.approx(v(ruger(p, 2)))
        with pytest.raises(ParameterError):
            generalized_hommel(p, (0.1, 0.5))

    def test_twice_average(self):
        assert v(twice_average([0.1, 0.2, 0.3])) == pytest.approx(0.4)
        assert v(twice_average([0.5, 0.5])) == 1.0
        assert v(twice_average([0.0, 0.0])) == 0.0

    def test_harmonic(self):
        assert v(harmonic([0.1, 0.1])) == pytest.approx(0.23266, abs=1e-5)
        assert v(harmonic([0.1, 0.1])) == pytest.approx((T2 + 1) * 0.1)
        assert v(harmonic([0.01, 0.9], improved=True)) == pytest.approx(0.03653, abs=1e-5)
        assert v(harmonic([0.01, 0.9], improved=True)) == pytest.approx((2 * T2 + 1) * 0.01)
        assert v(harmonic([0.0, 0.4])) == 0.0

    def test_geometric(self):
        e1 = math.exp(-1)
        assert v(geometric([e1, e1])) == pytest.approx(1.0)
        assert v(geometric([0.01, 1.0], improved=True)) == pytest.approx(math.e ** 2 * 0.01)
        assert v(geometric([0.0, 0.4])) == 0.0

    def test_generalized_mean(self):
        assert v(generalized_mean([0.1, 0.2, 0.3], 1)) == pytest.approx(0.4)
        assert v(generalized_mean([0.1, 0.1], -1)) == pytest.approx(0.23266, abs=1e-5)
        assert v(generalized_mean([0.3, 0.4], 2)) == pytest.approx(0.61237, abs=1e-5)
        assert v(generalized_mean([0.3, 0.4], 2)) == pytest.approx(
            math.sqrt(3) * math.sqrt(0.125))
        with pytest.raises(ParameterError):
            generalized_mean([0.3, 0.4], 0)

    def test_baselines(self):
        from scipy import stats

        p = [0.01, 0.2, 0.5]
        assert v(fisher(p)) == pytest.approx(stats.combine_pvalues(p, method="fisher")[1])
        assert v(simes(p)) == pytest.approx(min(3 * 0.01, 3 * 0.2 / 2, 0.5))


def test_single_value_is_identity():
    for label in BATCH_RULES:
        assert merge(label, [0.37]).value == 0.37


def test_input_handling():
    with pytest.raises(ParameterError):
        bonferroni([])
    with pytest.raises(ParameterError):
        bonferroni([0.1, -0.1])
    with pytest.warns(UserWarning):
        r = bonferroni([0.3, 1.5])
    assert r.value == 0.6
    with pytest.raises(ParameterError):
        bonferroni([0.1, float("nan")])


@given(pvectors(2, 7), st.randoms(use_true_random=False))
def test_symmetric(p, rnd):
    q = p.copy()
    rnd.shuffle(q)
    a = merge_rows
    for label in BATCH_RULES:
        assert a(label, p[None])[0] == pytest.approx(a(label, q[None])[0], rel=1e-13, abs=1e-300)


@given(pvectors(2, 6), st.integers(0, 5), st.floats(0.0, 1.0))
def test_monotone_in_each_coordinate(p, i, bump):
    i = i % p.size
    q = p.copy()
    q[i] = max(q[i], bump)
    for label in BATCH_RULES:
        a, b = merge_rows(label, p[None])[0], merge_rows(label, q[None])[0]
        assert a <= b + 1e-13 * b + 2.0 ** -49, label


_EXACT_HOMOGENEOUS = ("bonferroni", "median", "hommel[classical]", "average",
                      "harmonic[plain]", "harmonic[improved]")


@given(pvectors(2, 6), st.integers(1, 8))
def test_homogeneous_dyadic(p, j):
    # powers of two scale without rounding, so linear forms match exactly
    g = 2.0 ** -j
    for label in BATCH_RULES:
        a = merge_rows(label, p[None])[0]
        b = merge_rows(label, (g * p)[None])[0]
        if a >= 1.0:
            continue
        if label in _EXACT_HOMOGENEOUS:
            assert b == g * a, label
        elif "exact" in label:
            assert b == pytest.approx(g * a, abs=2.0 ** -48), label
        else:
            assert b == pytest.approx(g * a, rel=1e-13), label


@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_dominations(K, seed):
    P = np.random.default_rng(seed).random((50, K)) ** 3
    slack = 1e-13
    pairs = (("hommel[exact]", "hommel[classical]"), ("harmonic[improved]", "harmonic[plain]"),
             ("geometric[improved]", "geometric[plain]"))
    for lo, hi in pairs:
        a, b = merge_rows(lo, P), merge_rows(hi, P)
        assert (a <= b + slack * b + 2.0 ** -49).all(), (lo, hi)


def test_generalized_mean_reductions(rng):
    P = rng.random((200, 5))
    np.testing.assert_allclose(merge_rows("generalized_mean[r=1]", P),
                               merge_rows("average", P), rtol=1e-14)
    np.testing.assert_allclose(merge_rows("generalized_mean[r=-1]", P),
                               merge_rows("harmonic[plain]", P), rtol=1e-14)


def test_permutations_of_small_vector():
    p = (0.5, 0.1, 0.4, 0.2)
    for label in BATCH_RULES:
        vals = {merge(label, q).value for q in itertools.permutations(p)}
        assert max(vals) - min(vals) <= 1e-15, label
