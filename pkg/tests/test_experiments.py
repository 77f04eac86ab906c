import json

import numpy as np
import pytest

from conewalk import experiments as E
from conewalk import manifest as M
from conewalk.cones import parse_cone
from conewalk.conditioned import sample_bridge
from conewalk.errors import InvalidInputError
from conewalk.harmonic import build_v_exact
from conewalk.increments import parse_steps, rademacher

HALF = parse_cone("half-line")
SRW = parse_steps("lattice:srw", 1)
WA2 = parse_cone("weyl-a:2")


def test_report_statistic_convention():
    checks = [{"name": "a", "statistic": 0.5, "threshold": 1.0, "passed": True},
              {"name": "b", "statistic": 3.0, "threshold": 2.0, "passed": False}]
    rep = E.TestReport.from_checks("x", checks, {}, {}, {}, {("a", "s"): np.ones(3)})
    assert rep.statistic == 1.5 and rep.threshold == 1.0 and not rep.passed
    assert "samples" not in rep.to_dict()
    json.dumps(rep.to_dict())


def test_meander_negative_control_small_n():
    # at n = 10 the lattice meander is far from its limit and the unconditioned walk is further still
    neg = E.meander_negative_control(HALF, SRW, [1], 10, 5000, seed=1)
    assert not neg.passed
    rep = E.meander_convergence_test(HALF, SRW, [1], 10, 5000, seed=2, reference=False)
    assert rep.statistic < neg.statistic


def test_htransform_negative_control_fails():
    assert not E.htransform_negative_control(HALF, SRW, [1], 400, 5000, seed=3).passed


def test_htransform_small_run_passes():
    tab = build_v_exact(HALF, SRW, 200, 1e-12)
    rep = E.htransform_convergence_test(HALF, SRW, tab, [1], 400, 5000, seed=4, bessel_count=5000)
    assert rep.passed, rep.checks


def test_feierl_functional_properties():
    ens = sample_bridge(WA2, rademacher(2), [0, 2], 40, [0, 2], 2000, seed=5, record="full")
    top = E.feierl_functional(ens, "max-top")
    rng_ = E.feierl_functional(ens, "max-range")
    assert np.all(rng_ >= 0)
    assert np.all(top >= (ens.positions[:, -1, 1]) / ens.scale - 1e-12)
    # running maxima agree with the recorded path
    full = ens.positions / ens.scale
    assert np.allclose(top, full[:, :, 1].max(axis=1))
    assert np.allclose(rng_, np.abs(full[:, :, 1] - full[:, :, 0]).max(axis=1))
    with pytest.raises(InvalidInputError):
        E.feierl_functional(sample_bridge(HALF, SRW, [1], 4, [1], 5, seed=0), "max-top")


def test_feierl_small_run_passes():
    rep = E.feierl_universality_test(WA2, rademacher(2), parse_steps("lattice:lazy2", 2), [0, 2], [0, 2], 60, 2000,
                                     seed=6)
    assert rep.passed and rep.metadata["corrected"]
    assert rep.metadata["ladder_offsets"]["a"] == pytest.approx(-0.5, abs=1e-6)


def test_survival_exponent_exact():
    res = E.survival_exponent(HALF, SRW, [1], np.array([100, 200, 400, 800, 1600, 3200, 6400]), method="exact",
                              tol=0.02)
    assert res.method == "exact-dp" or "exact" in res.method
    assert abs(res.fit.slope + 0.5) < 0.02 and res.report.passed


def test_catalogue_check():
    assert E.catalogue_check(seed=1, count=30).passed


def test_harmonic_v_check_srw():
    rep = E.harmonic_v_check(HALF, SRW, 30, mc_points=[[2]], mc_n=200, replicas=50000, seed=7)
    assert rep.passed


def test_manifest_validation():
    good = {"schema": 1, "experiments": [{"id": "a", "kind": "exponent-catalogue"}]}
    assert M.validate(good) is good
    bad = [
        {"schema": 2, "experiments": good["experiments"]},
        {"schema": 1, "experiments": []},
        {"schema": 1, "experiments": [{"id": "a", "kind": "nope"}]},
        {"schema": 1, "experiments": [{"id": "a", "kind": "exponent-catalogue", "bogus": 1}]},
        {"schema": 1, "experiments": [{"id": "a", "kind": "exponent-catalogue"}] * 2},
        {"schema": 1, "experiments": [{"id": "a", "kind": "survival-exponent", "cone": "half-line"}]},
        {"schema": 1, "experiments": [{"id": "a", "kind": "exponent-catalogue", "expect": "maybe"}]},
    ]
    for b in bad:
        with pytest.raises(InvalidInputError):
            M.validate(b)


def test_bundled_manifests_valid():
    for name in ("default.json", "smoke.json"):
        man = M.load(name)
        assert man["schema"] == M.SCHEMA
    crit = {e.get("criterion") for e in M.load("default.json")["experiments"]}
    assert crit == set(range(1, 9))
