import math
from fractions import Fraction

import numpy as np
import pytest

import _oracles as O
from cascade_ldp import DomainError, MomentDivergence, WeightModel
from cascade_ldp import moments as mo
from cascade_ldp.wmodel import raw_moment


def test_partition_enumeration_counts():
    # p(10) = 42; with at most 3 parts: 14
    assert sum(1 for _ in mo.partitions(10, 10, 10)) == 42
    assert sum(1 for _ in mo.partitions(10, 10, 3)) == 14
    assert sum(1 for _ in mo.partitions(10, 9, 10)) == 41
    for part in mo.partitions(12, 5, 4):
        assert sum(k * m for k, m in part.items()) == 12
        assert max(part) <= 5 and sum(part.values()) <= 4


def test_chi_examples(expo, twopoint):
    c10 = mo.chi(expo, 10)
    assert 21 < c10 < 22
    assert math.floor(c10) == O.chi_exp_integer_bracket(10)
    assert mo.chi(twopoint, 3) == math.inf
    with pytest.raises(DomainError):
        mo.chi(twopoint, 2)


def test_chi_trend(expo):
    rs = [10, 100, 1000, 10_000]
    vals = [mo.chi(expo, r) for r in rs]
    ratios = [v / r for v, r in zip(vals, rs)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] / math.e - 1) < 0.15


def test_chi_is_threshold(expo):
    c = mo.chi(expo, 10)
    assert raw_moment(expo, c - 1e-6) < 10 ** (c - 1e-6 - 1)
    assert raw_moment(expo, c + 1e-6) > 10 ** (c + 1e-6 - 1)


def test_cascade_examples(expo):
    assert mo.cascade_moments(expo, 4, 3, "exact").values == [1, 1, Fraction(3, 2), Fraction(33, 10)]
    assert mo.cascade_moments(expo, 10, 2, "exact")[2] == Fraction(9, 8)
    tab = mo.cascade_moments(expo, 4, 3)
    assert tab[2] == pytest.approx(1.5, rel=1e-13)
    assert tab[3] == pytest.approx(3.3, rel=1e-13)
    with pytest.raises(MomentDivergence):
        mo.cascade_moments(expo, 2, 2)


@pytest.mark.parametrize("r", range(2, 7))
def test_multiplicity_equals_composition_sum(r):
    for model, wmom in [(WeightModel.exponential(), O.exp_moments(6)),
                        (WeightModel.two_point(0.25), O.twopoint_moments(0.25, 6))]:
        h_ok = [h for h in range(2, 7) if wmom[h] < Fraction(r) ** (h - 1)]
        h_max = max([1] + [h for h in h_ok if all(k in h_ok for k in range(2, h + 1))])
        if model.kind == "twopoint" and math.log(r) <= math.log(4 / 3):
            continue
        if h_max < 2:
            continue
        got = mo.cascade_moments(model, r, h_max, "exact").values
        assert got == O.kp_direct(wmom, r, h_max)


def test_values_nondecreasing_and_float_matches_exact(expo):
    ex = mo.cascade_moments(expo, 30, 12, "exact")
    fl = mo.cascade_moments(expo, 30, 12)
    assert np.all(np.diff(fl.as_float()) >= 0)
    assert np.allclose(fl.as_float(), ex.as_float(), rtol=1e-12)
    assert all(ex.exact) and not any(fl.exact)


def test_finite_tree_examples(expo):
    assert mo.finite_tree_moments(expo, 4, 1, 2, "exact")[2] == Fraction(5, 4)
    assert mo.finite_tree_moments(expo, 4, 2, 2, "exact")[2] == Fraction(11, 8)
    for n in (1, 3, 5):
        assert mo.finite_tree_moments(expo, 5, n, 4)[1] == 1.0


@pytest.mark.parametrize("r,n", [(2, 1), (3, 2), (4, 3)])
def test_finite_tree_matches_composition_sum(r, n):
    got = mo.finite_tree_moments(WeightModel.exponential(), r, n, 4, "exact").values
    assert got == O.finite_direct(O.exp_moments(4), r, n, 4)


def test_finite_tree_converges_to_limit(expo):
    limit = mo.cascade_moments(expo, 4, 2, "exact")[2]
    prev_gap = None
    for n in range(1, 12):
        v = mo.finite_tree_moments(expo, 4, n, 2, "exact")[2]
        gap = limit - v
        assert gap > 0
        if prev_gap is not None:
            assert gap / prev_gap == Fraction(raw_moment(expo, 2)) / 4
        prev_gap = gap
    assert float(mo.finite_tree_moments(expo, 4, 40, 2)[2]) == pytest.approx(1.5, rel=1e-9)


def test_upper_bound(expo):
    assert mo.moment_upper_bound(expo, 200, 10, 0.5) == pytest.approx(
        math.exp(100 / 380 * (1 + 0.5 + (4 + 13 / 12) / 10)), rel=1e-14)
    r = 17
    big_c = 2 * 2 + 13 / 12
    assert mo.moment_upper_bound(expo, r, 1, 1.0) == pytest.approx(math.exp((1 + 1 + big_c) / (2 * (r - 1))))
    tab = mo.cascade_moments(expo, 200, 20)
    for h in range(1, 21):
        assert tab[h] <= mo.moment_upper_bound(expo, 200, h, 0.5)
    with pytest.raises(DomainError):
        mo.moment_upper_bound(expo, 10, 10, 0.5)


def test_sup_ratio_attained_at_two(expo):
    for r in (50, 200):
        ratios = [raw_moment(expo, h) / r ** (h - 1) for h in range(2, int(0.2 * r) + 1)]
        assert max(ratios) == pytest.approx(2 / r, rel=1e-14)


def test_kappa(expo):
    rows = mo.kappa_estimate(expo, 0.2, [10])
    assert rows[0, 1] == pytest.approx(math.log(9 / 8) / 10, rel=1e-12)
    rows = mo.kappa_estimate(expo, 0.2, [10, 20, 40])
    assert np.all(rows[:, 1] <= 5 * 0.2**2)
    assert mo.kappa_estimate(expo, 0.1, [10])[0, 1] == 0.0


def test_variance_anchor(expo):
    for r in (3, 4, 10, 57):
        tab = mo.cascade_moments(expo, r, 2, "exact")
        w2 = Fraction(2)
        assert (tab[2] - 1) * (r - w2) / (w2 - 1) == 1
