import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sst

from conewalk.cones import parse_cone
from conewalk.errors import InvalidInputError
from conewalk.increments import parse_steps, rademacher
from conewalk.lattice_dp import exact_survival
from conewalk.stats import (
    bootstrap_band, chi_square_uniform, exponent_fit, horizon_grid, jitter, ks_one_sample, ks_two_sample, ks_weighted,
    tv_distance,
)


def uniform_cdf(x):
    return np.clip(x, 0, 1)


def test_ks_one_sample_examples():
    assert ks_one_sample([0.5], uniform_cdf).statistic == pytest.approx(0.5)
    N = 200
    q = np.arange(1, N + 1) / (N + 1)
    assert ks_one_sample(q, uniform_cdf).statistic <= 1 / (N + 1) + 1e-12
    assert ks_one_sample(np.full(1000, 0.3), uniform_cdf).statistic >= 0.5


def test_ks_one_sample_matches_scipy():
    x = np.random.default_rng(0).normal(size=500)
    r = ks_one_sample(x, sst.norm.cdf)
    ref = sst.kstest(x, "norm", method="exact")
    assert r.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert r.pvalue == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_weighted_reduces_to_unweighted():
    x = np.random.default_rng(1).random(300)
    a = ks_weighted(x, np.ones_like(x), uniform_cdf)
    b = ks_one_sample(x, uniform_cdf)
    assert a.statistic == pytest.approx(b.statistic) and a.sizes == (300, 300)


def test_ks_two_sample_examples():
    a = np.arange(10.0)
    assert ks_two_sample(a, a).statistic == 0.0
    assert ks_two_sample(a, a + 100).statistic == 1.0
    x, y = np.random.default_rng(2).random((2, 400))
    assert ks_two_sample(x, y).statistic == pytest.approx(sst.ks_2samp(x, y).statistic, abs=1e-12)


def test_ks_two_sample_chi3_calibration():
    # false rejections at 1% over 40 independent chi_3 pairs: P(more than 3) < 1e-3
    rng = np.random.default_rng(3)
    fails = sum(not ks_two_sample(sst.chi.rvs(3, size=10**4, random_state=rng),
                                  sst.chi.rvs(3, size=10**4, random_state=rng)).passed for _ in range(40))
    assert fails <= 3


def test_tv_examples():
    assert tv_distance({1: 0.5, 2: 0.5}, {1: 0.5, 2: 0.5}) == 0.0
    assert tv_distance({1: 1.0}, {2: 1.0}) == 1.0
    assert tv_distance([0.2, 0.8], [0.5, 0.5]) == pytest.approx(0.3)
    with pytest.raises(InvalidInputError):
        tv_distance([0.5, 0.5], [1.0])


def test_exponent_fit_exact_power():
    n = horizon_grid("100:10000:log10")
    fit = exponent_fit(np.stack([n, n ** -1.5], axis=1))
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)


def test_exponent_fit_dp_oracles():
    n = horizon_grid("100:10000:log10")
    srw = exact_survival(parse_cone("half-line"), parse_steps("lattice:srw", 1), [1], n)
    assert abs(exponent_fit(np.stack([n, srw], axis=1)).slope + 0.5) < 0.02
    quad = exact_survival(parse_cone("orthant:2"), rademacher(2), [1, 1], n)
    assert abs(exponent_fit(np.stack([n, quad], axis=1)).slope + 1.0) < 0.05


def test_exponent_fit_errors():
    with pytest.raises(InvalidInputError):
        exponent_fit([[10, 0.1], [20, 0.05]])
    with pytest.raises(InvalidInputError):
        exponent_fit([[n, 1 / n] for n in range(10, 16)])


def test_horizon_grid():
    g = horizon_grid("100:10000:log10")
    assert g[0] == 100 and g[-1] == 10000 and len(g) == 21
    assert horizon_grid("10:1000:log3").tolist() == [10, 100, 1000]
    assert horizon_grid("1:9:5").tolist() == [1, 3, 5, 7, 9]
    for bad in ("100:10", "a:b:log10", "5:1:log10", "1:10:logx"):
        with pytest.raises(InvalidInputError):
            horizon_grid(bad)


def test_jitter_stays_in_cell():
    rng = np.random.default_rng(4)
    v = np.arange(0.0, 10.0, 2.0)
    j = jitter(np.repeat(v, 100), 2.0, rng)
    assert np.all(np.abs(j - np.repeat(v, 100)) <= 1.0)


def test_bootstrap_band_identical_samples():
    x = np.random.default_rng(5).normal(size=2000)
    diff, band = bootstrap_band(np.mean, (x,), np.mean, (x,), resamples=200)
    assert diff == 0.0 and band > 0


def test_chi_square_uniform():
    u = np.random.default_rng(6).random(10**4)
    assert chi_square_uniform(u).passed
    assert not chi_square_uniform(u**2).passed


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=50))
def test_ks_statistic_bounds(xs):
    d = ks_one_sample(xs, uniform_cdf).statistic
    assert 1 / (2 * len(xs)) - 1e-12 <= d <= 1.0
