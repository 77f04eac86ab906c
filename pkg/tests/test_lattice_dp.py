import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.cones import parse_cone
from conewalk.errors import ReachabilityError
from conewalk.increments import parse_steps, rademacher
from conewalk.lattice_dp import (
    Box, _generic, bridge_prefix_identity, bridge_probability, endpoint_law, enumerate_paths, exact_survival,
    karlin_mcgregor_count, point_probability, reach_box, sample_bridge_dp,
)

HALF = parse_cone("half-line")
SRW = parse_steps("lattice:srw", 1)
LAZY = parse_steps("lattice:lazy2", 1)


def test_box_spacing():
    b = Box([1, -4], (3, 2), [2, 4])
    assert b.points().tolist() == [[1, -4], [1, 0], [3, -4], [3, 0], [5, -4], [5, 0]]
    assert b.holds([3, 0]) and not b.holds([2, 0]) and not b.holds([7, 0])
    assert b.index([5, 0]) == (2, 1)


def test_reach_box_lazy_bridge_is_tight():
    atoms = np.array([[-2], [0], [2]])
    b = reach_box(HALF, atoms, np.array([2]), 10, np.array([2]))
    # congruent to 2 mod 2, positive, and reachable from 2 and back within 10 steps
    assert b.spacing.tolist() == [2] and b.lo.tolist() == [2]
    assert b.points()[-1, 0] == 12


def test_endpoint_law_srw():
    law = endpoint_law(HALF, SRW, [1], 3)
    assert law == pytest.approx({(2,): 2 / 3, (4,): 1 / 3})
    assert point_probability(HALF, SRW, [1], [2], 3) == pytest.approx(0.25)


def test_karlin_mcgregor_matches_generic():
    cone = parse_cone("weyl-a:3")
    x = np.array([0, 2, 4])
    hs = [1, 3, 6, 9]
    km, method = exact_survival(cone, rademacher(3), x, hs, return_method=True)
    assert method == "karlin-mcgregor"
    assert np.allclose(km, _generic(cone, rademacher(3), x, hs), atol=1e-14)
    # one step from (0,2,4): the sign pairs (+,-) on either adjacent gap collide
    assert Fraction(karlin_mcgregor_count(cone, x, 1), 8) == Fraction(1, 2)


def test_weyl_b_karlin_mcgregor_matches_enumeration():
    cone = parse_cone("weyl-b:2")
    x = np.array([1, 3])
    want = sum(p for _, p, ex in enumerate_paths(cone, rademacher(2), x, 5) if ex is None)
    assert exact_survival(cone, rademacher(2), x, [5])[0] == pytest.approx(want, abs=1e-14)


def test_bridge_probability_and_parity():
    # paths 1 -> 1 in 4 steps staying positive: 2 of 16
    assert bridge_probability(HALF, SRW, [1], [1], 4) == pytest.approx(2 / 16)
    with pytest.raises(ReachabilityError):
        bridge_probability(HALF, SRW, [1], [2], 4)
    with pytest.raises(ReachabilityError):
        bridge_probability(HALF, SRW, [1], [9], 4)


def test_bridge_sampler_uniform_two_paths():
    ens = sample_bridge_dp(HALF, SRW, [1], [1], 4, 20000, seed=3, record="full")
    paths, counts = np.unique(ens.positions[:, :, 0], axis=0, return_counts=True)
    assert sorted(map(tuple, paths.tolist())) == [(1, 2, 1, 2, 1), (1, 2, 3, 2, 1)]
    assert abs(counts[0] / 20000 - 0.5) < 0.02


def test_bridge_sampler_lazy_matches_enumeration():
    x, y, n = [2], [4], 6
    ens = sample_bridge_dp(HALF, LAZY, x, y, n, 30000, seed=8, record=[3])
    atoms = np.array([-2, 0, 2])
    mids = {}
    for seq, pr, ex in enumerate_paths(HALF, LAZY, x, n):
        if ex is None and 2 + atoms[list(seq)].sum() == 4:
            m = 2 + atoms[list(seq[:3])].sum()
            mids[m] = mids.get(m, 0.0) + pr
    tot = sum(mids.values())
    for m, p in mids.items():
        assert abs(np.mean(ens.positions[:, 1, 0] == m) - p / tot) < 0.015


def test_prefix_identity_exact():
    left, right = bridge_prefix_identity(HALF, SRW, [1], [1], 8, 0.5)
    keys = set(left) | set(right)
    assert max(abs(left.get(k, 0.0) - right.get(k, 0.0)) for k in keys) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 9))
def test_bridge_probability_property(x, y, n):
    want = 0.0
    for seq, pr, ex in enumerate_paths(HALF, SRW, [x], n):
        if ex is None and x + SRW.support()[0][list(seq), 0].sum() == y:
            want += pr
    try:
        got = bridge_probability(HALF, SRW, [x], [y], n)
    except ReachabilityError:
        got = 0.0
    assert got == pytest.approx(want, abs=1e-14)
