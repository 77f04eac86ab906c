import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.cones import parse_cone
from conewalk.engine import (
    fuk_nagaev_bound, max_norm, rejection_ensemble, scaled_path, simulate_path, step_tail, survival_probability_exact,
    survival_probability_mc,
)
from conewalk.errors import AcceptanceUnderflowError, InvalidInputError
from conewalk.increments import gaussian, parse_steps, rademacher
from conftest import survival_mass

HALF = parse_cone("half-line")
QUAD = parse_cone("orthant:2")
SRW = parse_steps("lattice:srw", 1)


def test_explicit_steps_survive():
    p = simulate_path(HALF, SRW, [1], 2, steps=[[1], [-1]])
    assert p.exit_index is None
    assert p.positions[:, 0].tolist() == [2.0, 1.0]


def test_explicit_steps_exit_on_boundary():
    p = simulate_path(HALF, SRW, [1], 3, steps=[[-1], [1], [1]])
    assert p.exit_index == 1 and p.n == 1
    q = simulate_path(QUAD, rademacher(2), [1, 1], 1, steps=[[-1, -1]])
    assert q.exit_index == 1


def test_random_path_consistent_with_replay():
    p = simulate_path(QUAD, rademacher(2), [3, 3], 50, rng_state=(7, 4), full=True)
    steps = np.diff(np.vstack([p.start, p.positions]), axis=0)
    assert np.all(np.abs(steps) == 1)
    q = simulate_path(QUAD, rademacher(2), [3, 3], 50, steps=steps, full=True)
    assert q.exit_index == p.exit_index
    again = simulate_path(QUAD, rademacher(2), [3, 3], 50, rng_state=(7, 4), full=True)
    assert np.array_equal(again.positions, p.positions)


def test_start_outside_rejected():
    with pytest.raises(InvalidInputError):
        simulate_path(QUAD, rademacher(2), [1, 0], 5)
    with pytest.raises(InvalidInputError):
        simulate_path(QUAD, SRW, [1, 1], 5)


def test_scaled_path_values():
    p = simulate_path(QUAD, rademacher(2), [3, 3], 4, steps=[[1, 1], [1, -1], [-1, 1], [1, 1]])
    X = scaled_path(p, 4)
    assert np.allclose(X(0.0), [1.5, 1.5])
    assert np.allclose(X(0.49), (np.array([3, 3]) + [1, 1]) / 2)
    assert np.allclose(X(1.0), (np.array([3, 3]) + [2, 2]) / 2)
    with pytest.raises(InvalidInputError):
        X(1.5)


def test_max_norm_examples():
    p = simulate_path(HALF, SRW, [1], 3, steps=[[1], [1], [-1]])
    assert max_norm(p) == 2.0
    assert max_norm(simulate_path(HALF, SRW, [1], 0)) == 0.0
    q = simulate_path(QUAD, rademacher(2), [3, 3], 2, steps=[[1, 1], [1, -1]])
    assert max_norm(q) == 2.0


def test_survival_exact_examples(srw_oracle):
    assert survival_probability_exact(HALF, SRW, [1], 3).probability == pytest.approx(0.375, abs=1e-15)
    assert survival_probability_exact(HALF, SRW, [2], 1).probability == 1.0
    assert survival_probability_exact(QUAD, rademacher(2), [1, 1], 1).probability == pytest.approx(0.25)
    for x, n in [(1, 7), (2, 9), (3, 12)]:
        assert survival_probability_exact(HALF, SRW, [x], n).probability == pytest.approx(sum(p for _, p in srw_oracle(x, n)), abs=1e-14)


def test_survival_exact_matches_enumeration_weyl():
    cone = parse_cone("weyl-a:3")
    dist = rademacher(3)
    atoms, probs = dist.support()
    want = survival_mass([0.0, 2.0, 4.0], 4, atoms, probs, lambda z: z[0] < z[1] < z[2])
    got = survival_probability_exact(cone, dist, [0, 2, 4], 4).probability
    assert got == pytest.approx(want, abs=1e-14)


def test_survival_mc_examples():
    e1 = survival_probability_mc(HALF, SRW, [1], 1, 200000, 11)
    assert abs(e1.probability - 0.5) < 4 * e1.std_error
    e3 = survival_probability_mc(HALF, SRW, [1], 3, 200000, 12)
    assert abs(e3.probability - 0.375) < 4 * e3.std_error
    assert survival_probability_mc(QUAD, gaussian(2), [0.1, 0.1], 0, 10, 0).probability == 1.0


def test_survival_mc_gaussian_half_line_against_quadrature():
    # P(tau > 1) for a Gaussian step from x is P(x + Z > 0)
    e = survival_probability_mc(HALF, gaussian(1), [0.3], 1, 200000, 5)
    assert abs(e.probability - 0.6179114221889526) < 4 * e.std_error


def test_fuk_nagaev_values():
    assert fuk_nagaev_bound(100, 10, 10, 1) == pytest.approx(2 * math.e, rel=1e-12)
    assert fuk_nagaev_bound(100, 50, 5, 1) == pytest.approx(2 * math.exp(10) * 0.4**10, rel=1e-12)
    assert fuk_nagaev_bound(100, 50, 5, 1) == pytest.approx(4.619, abs=1e-3)
    assert fuk_nagaev_bound(100, 10, 3, 2, dist=rademacher(2)) == fuk_nagaev_bound(100, 10, 3, 2)
    assert step_tail(rademacher(2), 1.5) == 0.0 and step_tail(rademacher(2), 1.0) == 1.0


def test_fuk_nagaev_dominates_empirical_tail():
    rng = np.random.default_rng(2)
    n, x = 100, 30.0
    m = np.abs(np.cumsum(rng.choice([-1.0, 1.0], size=(20000, n)), axis=1)).max(axis=1)
    emp = float(np.mean(m > x))
    for y in (2.0, 5.0, 10.0):
        assert emp <= fuk_nagaev_bound(n, x, y, 1, dist=SRW)


def test_rejection_ensemble_conditioning():
    ens = rejection_ensemble(HALF, SRW, [1], 3, 3000, seed=9, record="full")
    assert np.all(ens.positions[:, 1:, 0] > 0)
    # exactly 3 surviving paths of 8, each equally likely
    paths, counts = np.unique(ens.positions[:, :, 0], axis=0, return_counts=True)
    assert len(paths) == 3
    assert np.all(np.abs(counts / 3000 - 1 / 3) < 0.04)
    assert abs(ens.acceptance - 0.375) < 0.03


def test_factorized_quadrant_matches_joint():
    a = rejection_ensemble(QUAD, rademacher(2), [1, 1], 3, 4000, seed=3, record="end")
    b = rejection_ensemble(QUAD, rademacher(2), [1, 1], 3, 4000, seed=3, record="end", factorize=False)
    assert a.metadata["method"] == "rejection-factorized" and b.metadata["method"] == "rejection"
    for ens in (a, b):
        end = ens.positions[:, -1]
        # P(end coordinate = 2 | survive) = 2/3 per coordinate, independently
        assert abs(np.mean(end[:, 0] == 2) - 2 / 3) < 0.04
        assert abs(np.mean((end[:, 0] == 2) & (end[:, 1] == 2)) - 4 / 9) < 0.04
    assert abs(a.acceptance - 0.375**2) < 0.02


def test_underflow_error():
    with pytest.raises(AcceptanceUnderflowError):
        rejection_ensemble(HALF, SRW, [1], 400, 500, seed=0, max_trials=1000)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10))
def test_exact_survival_property(x, n):
    want = survival_mass([float(x)], n, np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]),
                               lambda z: z[0] > 0)
    assert survival_probability_exact(HALF, SRW, [x], n).probability == pytest.approx(want, abs=1e-14)
