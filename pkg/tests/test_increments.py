import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conewalk.errors import InvalidInputError
from conewalk.increments import (
    check_normalisation, coordinate_cells, coordinate_spans, exact_moments, gaussian, integer_support, lattice,
    ladder_offset, parse_steps, product_lattice, rademacher, read_support_file, sample_step, sphere,
)


def test_rademacher_atoms():
    rng = np.random.default_rng(0)
    x = sample_step(rademacher(2), rng, 4000)
    assert set(map(tuple, x.tolist())) == {(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)}
    counts = np.unique(x, axis=0, return_counts=True)[1] / 4000
    assert np.all(np.abs(counts - 0.25) < 0.03)


def test_srw_and_sphere_samples():
    rng = np.random.default_rng(1)
    srw = parse_steps("lattice:srw", 1)
    assert set(np.unique(sample_step(srw, rng, 100))) == {-1.0, 1.0}
    s = sample_step(sphere(3), rng, 100)
    assert np.allclose(np.sqrt((s**2).sum(axis=1)), math.sqrt(3))


def test_exact_normalisation_rademacher():
    rep = check_normalisation(rademacher(2))
    assert rep.exact and rep.passed
    assert np.allclose(rep.mean, 0) and np.allclose(rep.covariance, np.eye(2))


def test_mass_deficit_rejected():
    with pytest.raises(InvalidInputError):
        lattice([[2.0], [-2.0], [0.0]], [1 / 8, 1 / 8, 0.65])


def test_wrong_covariance_flagged():
    rep = check_normalisation(lattice([[2.0], [-2.0]], [0.5, 0.5]))
    assert rep.exact and not rep.passed
    assert rep.covariance[0, 0] == pytest.approx(4.0)


def test_gaussian_monte_carlo_self_test():
    rep = check_normalisation(gaussian(5), samples=10**6, seed=3)
    assert not rep.exact and rep.passed
    assert rep.mean_deviation < 4 * rep.standard_error


def test_support_file(tmp_path):
    f = tmp_path / "lazy.txt"
    f.write_text("# lazy walk\n0.125 2\n0.75 0\n0.125 -2\n", encoding="utf-8")
    dist = read_support_file(f)
    mean, cov = exact_moments(dist)
    assert mean[0] == pytest.approx(0.0) and cov[0, 0] == pytest.approx(1.0)
    assert parse_steps(f"lattice:{f}", 1).dimension == 1
    with pytest.raises(InvalidInputError):
        parse_steps(f"lattice:{f}", 2)


def test_product_lattice_name_and_support():
    d = parse_steps("lattice:lazy2", 2)
    assert d.name == "lattice:lazy2:2"
    assert parse_steps(d.name, 2).name == d.name
    atoms, probs = integer_support(d)
    assert len(atoms) == 9 and probs.sum() == pytest.approx(1.0)
    assert np.allclose(coordinate_spans(d), [2, 2])
    assert np.allclose(coordinate_cells(d), coordinate_spans(d))


@pytest.mark.parametrize("bad", ["cauchy", "lattice:", "gaussian:3", "sphere:x", "lattice:nonexistent-file.txt"])
def test_parse_steps_rejects(bad):
    with pytest.raises(InvalidInputError):
        parse_steps(bad, 2)


def _ladder_oracle(atoms, probs, n):
    # Spitzer's identity E max_{k<=n} S_k = sum_k E[S_k^+] / k, by brute-force convolution
    lo = min(atoms)
    step = np.zeros(max(atoms) - lo + 1)
    for a, p in zip(atoms, probs):
        step[a - lo] += p
    law, em = np.array([1.0]), 0.0
    for k in range(1, n + 1):
        law = np.convolve(law, step)
        vals = np.arange(len(law)) + lo * k
        em += (np.clip(vals, 0, None) * law).sum() / k
    return em


def test_ladder_offset_matches_spitzer_limit():
    # E M_n - sigma sqrt(2n/pi) approaches the offset with an O(n^-1/2) error
    for name, atoms, probs in [("lattice:srw", [-1, 1], [0.5, 0.5]),
                               ("lattice:lazy2", [-2, 0, 2], [1 / 8, 3 / 4, 1 / 8])]:
        c = ladder_offset(parse_steps(name, 1))
        n = 2500
        em = _ladder_oracle(atoms, probs, n)
        assert abs(em - math.sqrt(2 * n / math.pi) - c) < 0.6 / math.sqrt(n)


def test_ladder_offset_values():
    # frozen: simple random walk -1/2, lazy walk on 2Z -1, Gaussian zeta(1/2)/sqrt(2 pi)
    assert ladder_offset(parse_steps("lattice:srw", 1)) == pytest.approx(-0.5, abs=1e-6)
    assert ladder_offset(parse_steps("lattice:lazy2", 2)) == pytest.approx(-1.0, abs=1e-6)
    assert ladder_offset(gaussian(1)) == pytest.approx(-0.5825971579390106, rel=1e-12)
    assert ladder_offset(rademacher(2), [-1, 1]) == pytest.approx(-1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32))
def test_product_law_moments(d, seed):
    base = parse_steps("lattice:lazy2", 1)
    dist = product_lattice(base, d)
    mean, cov = exact_moments(dist)
    assert np.allclose(mean, 0) and np.allclose(cov, np.eye(d))
    x = sample_step(dist, np.random.default_rng(seed), 10)
    assert x.shape == (10, d) and np.all(np.isin(x, [-2.0, 0.0, 2.0]))


@pytest.mark.parametrize("text", ["gaussian", "rademacher", "sphere", "lattice:srw", "lattice:lazy2"])
def test_canonical_names_parse_back(text):
    d = parse_steps(text, 2)
    assert parse_steps(str(d), 2).name == d.name
