import math

import numpy as np
import pytest

from ffia.exceptions import InvalidArgumentError, SingularKernelError, TranslationError
from ffia.mlfmm import (LocalExpansion, direct_excluded_sum, l2l, m2l, m2m, mlfmm_apply, p2m)
from ffia.partition import build_tree
from ffia.special import mlfmm_error_bound, select_truncations

TWO_PI = 2 * math.pi


def test_p2m_point_at_center():
    a = p2m([0.7], [1.0], 0.7, 6).coeffs
    assert np.array_equal(a, [1, 0, 0, 0, 0, 0])


def test_p2m_symmetric_pair():
    h = 0.3
    a = p2m([1 - h, 1 + h], [1.0, 1.0], 1.0, 8).coeffs
    m = np.arange(8)
    assert np.allclose(a, np.where(m % 2 == 0, 2 * h**m, 0), atol=1e-15)


def test_p2m_far_evaluation_tail():
    rng = np.random.default_rng(0)
    h, c, p = 0.2, 1.0, 12
    x = c + rng.uniform(-h, h, 15)
    w = rng.uniform(-1, 1, 15)
    y = c + 3 * h
    exact = np.sum(w / (y - x))
    approx = p2m(x, w, c, p).evaluate(y)
    assert abs(approx - exact) <= np.sum(np.abs(w)) * (1 / 3) ** p / (2 * h)


def test_p2m_rejects_outside_box():
    with pytest.raises(InvalidArgumentError):
        p2m([0.0, 0.5], [1, 1], 0.0, 4, radius=0.25)


def test_m2m_identity_and_single_source():
    e = p2m([0.3], [2.0], 0.1, 7)
    assert np.allclose(m2m(e, 0.1).coeffs, e.coeffs)
    assert np.allclose(m2m(e, 0.55).coeffs, p2m([0.3], [2.0], 0.55, 7).coeffs, rtol=1e-14)


def test_m2m_random_box():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, 0.25, 10)
    w = rng.normal(size=10) + 1j * rng.normal(size=10)
    child = p2m(x, w, 0.125, 12)
    direct = p2m(x, w, 0.25, 12).coeffs
    shifted = m2m(child, 0.25).coeffs
    assert np.max(np.abs(shifted - direct)) <= 1e-13 * np.max(np.abs(direct))


def test_m2l_point_charge():
    d = 1.3
    loc = m2l(p2m([0.0], [1.0], 0.0, 10), d)
    assert loc.evaluate(d) == pytest.approx(1 / d, rel=1e-15)
    # Taylor coefficients of 1/y about y = d
    assert np.allclose(loc.coeffs, [(-1) ** l / d ** (l + 1) for l in range(10)], rtol=1e-14)


def test_m2l_geometric_rate():
    rng = np.random.default_rng(5)
    h = 0.1
    x = rng.uniform(-h, h, 20)
    w = rng.uniform(0, 1, 20)
    ct = 4 * h  # neighbour-of-neighbour: minimum separation
    y = ct + rng.uniform(-h, h, 50)
    exact = np.array([np.sum(w / (yy - x)) for yy in y])
    for p in (6, 10, 14):
        loc = m2l(p2m(x, w, 0.0, p, radius=h), ct)
        err = np.max(np.abs(loc.evaluate(y) - exact))
        # |x - c|, |y - c_t| <= h and |c_t - c_s| = 4h: ratio (h + h)/(4h - h) < 1
        assert err <= np.sum(w) / (2 * h) * (2 / 3) ** p * 3


def test_m2l_rejects_adjacent_boxes():
    e = p2m([0.0], [1.0], 0.0, 4, radius=0.1)
    with pytest.raises(TranslationError):
        m2l(e, 0.2)
    with pytest.raises(TranslationError):
        m2l(p2m([0.0], [1.0], 0.0, 4), 0.0)


def test_l2l_identity_and_linear():
    b = np.array([1.5, -0.25])
    assert np.allclose(l2l(LocalExpansion(0.0, b), 0.0).coeffs, b)
    s = 0.4
    assert np.allclose(l2l(LocalExpansion(1.0, b), 1.0 + s).coeffs, [b[0] + b[1] * s, b[1]])


def test_l2l_polynomial_identity():
    rng = np.random.default_rng(9)
    parent = LocalExpansion(0.3, rng.normal(size=9) + 1j * rng.normal(size=9))
    child = l2l(parent, 0.45)
    y = rng.uniform(0.2, 0.6, 20)
    ref = parent.evaluate(y)
    assert np.max(np.abs(child.evaluate(y) - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_single_pair_near_and_excluded():
    tree = build_tree([0.0], [math.pi / 4, math.pi + math.pi / 4], 3)
    s = mlfmm_apply(tree, [1.0], 10)
    assert s[0] == pytest.approx(4 / math.pi, rel=1e-15)
    assert s[1] == 0


def test_wraparound_pair():
    tree = build_tree([TWO_PI - 0.01], [0.02], 6)
    assert mlfmm_apply(tree, [1.0], 12)[0] == pytest.approx(1 / 0.03, rel=1e-12)


def test_far_pair_through_expansions():
    # at l_max = 6 these two are in the interaction list of each other's ancestors
    tree = build_tree([0.1], [1.4], 6)
    p = 20
    assert mlfmm_apply(tree, [1.0], p)[0] == pytest.approx(1 / 1.3, rel=1e-8)


def test_two_separated_clusters():
    rng = np.random.default_rng(11)
    x = rng.uniform(0.0, 0.4, 30)
    y = rng.uniform(1.2, 1.5, 30)
    w = rng.uniform(-1, 1, 30)
    l, p = 5, 17
    err = np.max(np.abs(mlfmm_apply(build_tree(x, y, l), w, p) - direct_excluded_sum(x, y, w)))
    assert err <= mlfmm_error_bound(p, l)


def test_random_512_within_bound():
    rng = np.random.default_rng(42)
    x, y = rng.uniform(0, TWO_PI, (2, 512))
    w = rng.uniform(-1, 1, 512)
    err = np.max(np.abs(mlfmm_apply(build_tree(x, y, 5), w, 17) - direct_excluded_sum(x, y, w)))
    assert err <= mlfmm_error_bound(17, 5)


@pytest.mark.parametrize("l_max", [3, 4, 5, 6])
def test_matches_direct_to_roundoff_at_high_p(l_max):
    rng = np.random.default_rng(l_max)
    x, y = rng.uniform(0, TWO_PI, (2, 700))
    w = rng.normal(size=700) + 1j * rng.normal(size=700)
    ref = direct_excluded_sum(x, y, w)
    got = mlfmm_apply(build_tree(x, y, l_max), w, 40)
    assert np.max(np.abs(got - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_level2_only_tree_is_direct():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, TWO_PI, (2, 50))
    w = rng.uniform(size=50)
    got = mlfmm_apply(build_tree(x, y, 2), w, 5)
    assert np.allclose(got, direct_excluded_sum(x, y, w), rtol=1e-13)


def test_coincident_pair_raises():
    tree = build_tree([1.0, 2.0], [1.0], 4)
    with pytest.raises(SingularKernelError):
        mlfmm_apply(tree, [1.0, 1.0], 8)


def test_bad_inputs():
    tree = build_tree([1.0, 2.0], [0.5], 3)
    with pytest.raises(InvalidArgumentError):
        mlfmm_apply(tree, [1.0], 8)
    with pytest.raises(InvalidArgumentError):
        mlfmm_apply(tree, [1.0, 1.0], 0)


def test_p_from_selection_rule_has_geometric_decay():
    rng = np.random.default_rng(8)
    x, y = rng.uniform(0, TWO_PI, (2, 400))
    w = rng.uniform(-1, 1, 400)
    ref = direct_excluded_sum(x, y, w)
    errs = [np.max(np.abs(mlfmm_apply(build_tree(x, y, 4), w, select_truncations(e, 4)[1]) - ref))
            for e in (1e-2, 1e-4, 1e-6)]
    assert errs[0] > errs[1] > errs[2]
