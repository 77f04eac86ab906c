import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sst

from conewalk.bessel import log_iv
from conewalk.cones import parse_cone
from conewalk.errors import InvalidInputError
from conewalk.reference import (
    BOUNDARY_SHIFT, RadialLaw, bridge_weight, entrance_law_cdf, entrance_law_density, htransform_limit_identity_check,
    radial_transition_cdf, radial_transition_density, sample_bessel, sample_bm_meander, sample_h_bm,
    wedge_heat_kernel,
)
from conewalk.stats import ks_one_sample, ks_weighted

HALF = parse_cone("half-line")
QUAD = parse_cone("orthant:2")


def test_entrance_density_values():
    assert entrance_law_density(HALF, 1.0, 1.0) == pytest.approx(math.exp(-0.5) / (math.sqrt(2) * math.gamma(1.5)),
                                                                 rel=1e-13)
    assert entrance_law_density(HALF, 1.0, 1.0) == pytest.approx(0.48394, abs=1e-5)
    assert entrance_law_density(HALF, 1.0, 0.0) == 0.0
    r = np.linspace(0.1, 4, 7)
    assert np.allclose(entrance_law_density(QUAD, 1.0, r), sst.chi.pdf(r, 6), rtol=1e-12)
    assert np.allclose(entrance_law_cdf(QUAD, 2.0, r), sst.chi.cdf(r / math.sqrt(2), 6))
    with pytest.raises(InvalidInputError):
        entrance_law_density(HALF, 0.0, 1.0)


def test_entrance_density_normalized_and_scaling():
    for k in (3, 6, 7.5):
        tot, _ = integrate.quad(lambda r: entrance_law_density(k, 1.0, r), 0, np.inf, epsabs=1e-12)
        assert abs(tot - 1) < 1e-8
    r = np.linspace(0.05, 5, 25)
    for t in (0.3, 2.5):
        a = entrance_law_density(4, t, r)
        b = entrance_law_density(4, 1.0, r / math.sqrt(t)) / math.sqrt(t)
        assert np.allclose(a, b, rtol=1e-12, atol=0)


@pytest.mark.parametrize("delta", [3, 4, 7])
@pytest.mark.parametrize("h", [0.1, 1.0])
@pytest.mark.parametrize("r1", [0.5, 2.0])
def test_transition_normalized(delta, h, r1):
    law = RadialLaw.of_dimension(delta)
    tot, _ = integrate.quad(lambda r2: radial_transition_density(law, h, r1, r2), 0, np.inf, epsabs=1e-12,
                            limit=200)
    assert abs(tot - 1) < 1e-7


def test_chapman_kolmogorov():
    law = RadialLaw.of_dimension(5)
    for r1, r2 in [(0.5, 1.0), (1.0, 2.5)]:
        lhs, _ = integrate.quad(lambda m: radial_transition_density(law, 0.4, r1, m)
                                * radial_transition_density(law, 0.6, m, r2), 0, np.inf, epsabs=1e-12, limit=200)
        assert abs(lhs - radial_transition_density(law, 1.0, r1, r2)) < 1e-6


def test_delta_three_closed_form():
    law = RadialLaw.of_dimension(3)

    def closed(h, a, b):
        return (b / a) / math.sqrt(2 * math.pi * h) * (math.exp(-(a - b) ** 2 / (2 * h)) - math.exp(-(a + b) ** 2 / (2 * h)))

    assert radial_transition_density(law, 1.0, 1.0, 1.0) == pytest.approx(closed(1.0, 1.0, 1.0), abs=1e-12)
    for h, a, b in [(0.2, 0.3, 1.7), (3.0, 5.0, 2.0), (1e-3, 1.0, 1.01)]:
        assert radial_transition_density(law, h, a, b) == pytest.approx(closed(h, a, b), rel=1e-10)


def test_log_iv_matches_scipy():
    from scipy.special import ive

    z = np.array([1e-3, 0.5, 3.0, 40.0, 700.0])
    for nu in (0.5, 2.0, 7.3):
        assert np.allclose(log_iv(nu, z), np.log(ive(nu, z)) + z, rtol=1e-12, atol=1e-12)


def test_transition_cdf_matches_density():
    law = RadialLaw.of_dimension(4)
    p, _ = integrate.quad(lambda r2: radial_transition_density(law, 0.7, 1.2, r2), 0, 1.5)
    assert radial_transition_cdf(law, 0.7, 1.2, 1.5) == pytest.approx(p, abs=1e-9)


def test_sample_bessel():
    law = RadialLaw.of_dimension(3)
    p = sample_bessel(law, 0.0, [0.5, 1.0], 10**5, seed=1)
    end = p.values[:, -1]
    assert abs(end.mean() - 2 * math.sqrt(2 / math.pi)) < 4 * end.std() / math.sqrt(len(end))
    assert ks_one_sample(end, lambda r: entrance_law_cdf(3, 1.0, r)).passed
    q = sample_bessel(law, 0.0, [0.5, 1.0], 10**5, seed=1)
    assert np.array_equal(p.values, q.values)
    with pytest.raises(InvalidInputError):
        RadialLaw.of_dimension(1)


def test_sample_bessel_transition():
    law = RadialLaw.of_dimension(5)
    p = sample_bessel(law, 1.5, [0.8], 20000, seed=2)
    assert ks_one_sample(p.values[:, -1], lambda r: radial_transition_cdf(law, 0.8, 1.5, r)).passed


def test_bridge_weight():
    assert bridge_weight(HALF, 0.5, [1.0]) / bridge_weight(HALF, 0.5, [2.0]) == pytest.approx(0.5 * math.e**3)
    assert bridge_weight(HALF, 0.5, [1.0]) / bridge_weight(HALF, 0.5, [2.0]) == pytest.approx(10.0428, abs=1e-4)
    assert bridge_weight(QUAD, 0.3, [0.0, 1.0]) == 0.0
    assert bridge_weight(QUAD, 0.3, [0.4, 1.1]) == pytest.approx(bridge_weight(QUAD, 0.3, [1.1, 0.4]))
    with pytest.raises(InvalidInputError):
        bridge_weight(HALF, 1.0, [1.0])


def test_wedge_heat_kernel_quadrant_images():
    def dirichlet_1d(h, a, b):
        g = lambda v: math.exp(-v * v / (2 * h)) / math.sqrt(2 * math.pi * h)
        return g(a - b) - g(a + b)

    x = np.array([0.7, 1.3])
    for z in ([0.2, 0.9], [2.0, 0.5]):
        want = dirichlet_1d(0.6, x[0], z[0]) * dirichlet_1d(0.6, x[1], z[1])
        assert wedge_heat_kernel(math.pi / 2, 0.6, x, np.array(z)) == pytest.approx(want, rel=1e-10)


def test_bm_meander_endpoint_rayleigh():
    ens = sample_bm_meander(HALF, 256, 0.01, 20000, seed=3, record="end")
    assert np.all(ens.positions[:, 1:, 0] > ens.metadata.get("shift", [0])[0])
    end = ens.at(1.0)[:, 0]
    assert ks_one_sample(end, lambda r: sst.rayleigh.cdf(r)).passed
    again = sample_bm_meander(HALF, 256, 0.01, 20000, seed=3, record="end")
    assert np.array_equal(again.positions, ens.positions)
    assert BOUNDARY_SHIFT == pytest.approx(0.5825971579390106, rel=1e-12)


def test_h_bm_weights_and_chi3():
    # the coarse grid biases the weighted endpoint law, so this uses the default grid
    ens = sample_h_bm(HALF, [0.01], 1.0, 4096, 20000, seed=4, record="end")
    assert np.all(ens.weights >= 0) and ens.weights.sum() > 0
    end = ens.at(1.0)[:, 0]
    assert ks_weighted(end, ens.weights, lambda r: sst.chi.cdf(r, 3)).passed


def test_identity_check_half_line():
    rep = htransform_limit_identity_check(HALF, 0.01, 20000, seed=5, m=256)
    i = rep.functionals.index("one")
    assert rep.hbm_estimates[i] == pytest.approx(1.0) and rep.meander_estimates[i] == pytest.approx(1.0)
    assert rep.passed


def test_identity_check_mismatched_cone():
    mea = sample_bm_meander(QUAD, 64, 0.01, 100, seed=0)
    with pytest.raises(InvalidInputError):
        htransform_limit_identity_check(HALF, meander=mea, samples=100, m=64)
