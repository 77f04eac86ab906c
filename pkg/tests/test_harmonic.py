import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.cones import parse_cone
from conewalk.errors import ConvergenceError, InvalidInputError, UnsupportedError
from conewalk.harmonic import build_v_exact, estimate_v_mc, v_ratio
from conewalk.increments import gaussian, parse_steps, rademacher

HALF = parse_cone("half-line")
QUAD = parse_cone("orthant:2")
SRW = parse_steps("lattice:srw", 1)


@pytest.fixture(scope="module")
def srw_table():
    return build_v_exact(HALF, SRW, 40, 1e-12)


@pytest.fixture(scope="module")
def quad_table():
    return build_v_exact(QUAD, rademacher(2), 24, 1e-12)


def test_srw_v_is_identity(srw_table):
    for x in range(1, 21):
        assert abs(srw_table.value([x]) - x) < 1e-8
    assert srw_table.value([0]) == 0.0 and srw_table.value([-3]) == 0.0


def test_quadrant_v_is_product(quad_table):
    for x in range(1, 10):
        for y in range(1, 10):
            assert abs(quad_table.value([x, y]) - x * y) < 1e-8 * x * y
    assert quad_table.residual < 1e-8


def test_direct_solver_agrees(quad_table):
    tab = build_v_exact(QUAD, rademacher(2), 24, 1e-12, method="direct")
    assert np.allclose(tab.values, quad_table.values, atol=1e-8)


def test_zero_init_converges_to_same_table(srw_table):
    tab = build_v_exact(HALF, SRW, 40, 1e-12, init="zero")
    assert np.allclose(tab.values, srw_table.values, atol=1e-7)


def test_table_nonnegative_and_killed(quad_table):
    assert np.all(quad_table.values >= 0)
    pts = quad_table.box.points()
    outside = np.any(pts <= 0, axis=1)
    assert np.all(quad_table.values.ravel()[outside] == 0)


def test_v_ratio_examples(srw_table):
    assert v_ratio(srw_table, [1], [2]) == pytest.approx(2.0, abs=1e-8)
    assert v_ratio(srw_table, [3], [3]) == 1.0
    assert v_ratio(srw_table, [1], [0]) == 0.0
    with pytest.raises(InvalidInputError):
        v_ratio(srw_table, [0], [1])


def test_anchor_scale_covariance():
    a = build_v_exact(QUAD, rademacher(2), 16, 1e-12)
    b = build_v_exact(QUAD, rademacher(2), 16, 1e-12, anchor_scale=3.0)
    assert np.allclose(b.values, 3.0 * a.values, rtol=1e-8)
    assert v_ratio(b, [1, 1], [2, 3]) == pytest.approx(v_ratio(a, [1, 1], [2, 3]), rel=1e-9)


def test_kernel_rows(srw_table):
    assert np.allclose(sorted(srw_table.kernel_row([1])), [0.0, 1.0])
    row = dict(zip(srw_table.atoms[:, 0].tolist(), srw_table.kernel_row([2])))
    assert row[1] == pytest.approx(3 / 4) and row[-1] == pytest.approx(1 / 4)
    assert sum(srw_table.kernel_row([5])) == pytest.approx(1.0, abs=1e-10)


def test_errors():
    with pytest.raises(UnsupportedError):
        build_v_exact(HALF, gaussian(1), 20)
    with pytest.raises(InvalidInputError):
        build_v_exact(HALF, SRW, 5)
    with pytest.raises(ConvergenceError):
        build_v_exact(parse_cone("weyl-a:2"), parse_steps("lattice:lazy2", 2), 30, 1e-14, max_sweeps=3)


def test_sidecar_round_trip_keys(srw_table):
    s = srw_table.sidecar()
    assert s["window_radius"] == 40 and s["method"] == "jacobi"
    pts, vals = srw_table.rows()
    assert np.allclose(vals, pts[:, 0], atol=1e-8)


def test_mc_estimate_n_zero_and_srw():
    assert estimate_v_mc(HALF, SRW, [3], 0, 10, 0) == (3.0, 0.0)
    m, se = estimate_v_mc(HALF, SRW, [2], 200, 200000, 4)
    # E[x + S(n); tau > n] = x exactly for the killed SRW
    assert abs(m - 2.0) < 4 * se


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8))
def test_quadrant_harmonicity_property(x, y):
    tab = build_v_exact(QUAD, rademacher(2), 20, 1e-12)
    v = tab.value([x, y])
    nb = sum(p * tab.value(np.array([x, y]) + w) for w, p in zip(tab.atoms, tab.probs))
    assert abs(nb - v) < 1e-9 * max(v, 1)
