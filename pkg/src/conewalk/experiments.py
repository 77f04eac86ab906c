"""Pass/fail experiments for the invariance principles, with rerunnable reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sst

from .conditioned import sample_bridge, sample_htransform, sample_meander, sample_meander_split
from .cones import WEYL_A, WEYL_B, ConeSpec, exponent
from .engine import _Runner, check_start, survival_probability_mc
from .ensemble import SEG_NORM, SEG_RANGE, SEG_TOP, Ensemble
from .errors import InvalidInputError
from .harmonic import HarmonicTable
from .increments import StepDistribution, _float_gcd, ladder_offset
from .lattice_dp import exact_survival
from .reference import (
    DEFAULT_EPS, DEFAULT_GRID, RadialLaw, bridge_weight, radial_transition_cdf, sample_bessel, sample_bm_meander,
)
from .stats import (
    LEVEL, bootstrap_band, chi_square_uniform, exponent_fit, jitter, ks_one_sample, ks_two_sample,
)


@dataclass
class TestReport:
    """Outcome of one experiment.

    ``statistic`` is the largest ratio check statistic / check threshold,
    so the report passes iff statistic <= threshold = 1.  Each check keeps
    its own statistic and threshold.
    """

    __test__ = False  # not a pytest class

    experiment: str
    statistic: float
    threshold: float
    passed: bool
    sizes: dict
    seeds: dict
    checks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    # raw functional samples keyed by (functional, source); not part of to_dict
    samples: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_checks(cls, experiment, checks, sizes, seeds, metadata, samples=None):
        scores = [c["statistic"] / c["threshold"] if c["threshold"] > 0 else (0.0 if c["statistic"] <= 0 else math.inf)
                  for c in checks]
        stat = float(max(scores)) if scores else 0.0
        return cls(experiment, stat, 1.0, bool(all(c["passed"] for c in checks)), sizes, seeds, checks, metadata,
                   samples or {})

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
            "sizes": self.sizes,
            "seeds": self.seeds,
            "checks": self.checks,
            "metadata": self.metadata,
        }


def _check(name, kind, res, **extra):
    d = {"name": name, "kind": kind, "statistic": float(res.statistic), "threshold": float(res.threshold),
         "passed": bool(res.passed)}
    if hasattr(res, "pvalue"):
        d["pvalue"] = float(res.pvalue)
    d.update(extra)
    return d


def _jittered_at(ens: Ensemble, t: float, rng) -> np.ndarray:
    """Scaled positions at t with the lattice continuity correction."""
    pos = ens.at(t)
    cells = ens.cells if ens.cells is not None else np.zeros(ens.d)
    return jitter(pos, cells / ens.scale, rng) if np.any(cells > 0) else pos


def _jittered_max(ens: Ensemble, column: int, t: float, rng, t0: float = 0.0) -> np.ndarray:
    vals = ens.running_max(column, t, t0)
    width = _column_span(ens, column)
    return jitter(vals, width / ens.scale, rng) if width > 0 else vals


def _column_span(ens: Ensemble, column: int) -> float:
    if ens.dist is None or not ens.dist.is_lattice:
        return 0.0
    if column == SEG_TOP:
        return float(ens.spans[-1])
    if column == SEG_RANGE:
        atoms, _ = ens.dist.support()
        return _float_gcd(np.unique(np.abs(atoms[:, -1] - atoms[:, 0]))) if ens.d > 1 else 0.0
    # the norm is a lattice value only in one dimension
    return float(ens.spans[0]) if ens.d == 1 else 0.0


def _radii(v):
    return np.sqrt((np.asarray(v) ** 2).sum(axis=1))


def _describe(cone, dist, x, n):
    return {"cone": str(cone), "steps": str(dist), "start": [float(v) for v in np.ravel(x)], "n": int(n)}


def meander_convergence_test(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, seed: int, *,
                             bm_count: Optional[int] = None, eps: float = DEFAULT_EPS, m: int = DEFAULT_GRID,
                             split_levels=None, t_mid: float = 0.5, level: float = LEVEL,
                             reference: bool = True) -> TestReport:
    """Scaled walk under {tau_x > n} against the Brownian meander in K.

    (i) |X(1)| against the radial law with density proportional to
    r^(p+d-1) e^(-r^2/2) (one-sample KS); with ``reference``, (ii) the max
    norm and (iii) |X(t_mid)| against the grid Brownian meander (two-sample KS).
    """
    if split_levels:
        ens = sample_meander_split(cone, dist, x, n, count, split_levels, seed, record=[int(n * t_mid)])
    else:
        ens = sample_meander(cone, dist, x, n, count, seed, record=[int(n * t_mid)])
    rng = np.random.default_rng([int(seed), 1])
    k = exponent(cone) + cone.dimension
    end = _radii(_jittered_at(ens, 1.0, rng))
    checks = [_check("endpoint-radius", "ks-one-sample", ks_one_sample(end, sst.chi(k).cdf, level), degrees=k)]
    sizes = {"walk": ens.count}
    seeds = {"walk": int(seed)}
    raw = {("endpoint-radius", "walk"): end}
    if reference:
        bmc = bm_count or count
        bm = sample_bm_meander(cone, m, eps, bmc, seed + 1, record=[int(m * t_mid)])
        wmax = _jittered_max(ens, SEG_NORM, 1.0, rng)
        checks.append(_check("max-norm", "ks-two-sample", ks_two_sample(wmax, bm.running_max(SEG_NORM), level)))
        wmid = _radii(_jittered_at(ens, t_mid, rng))
        checks.append(_check(f"radius-at-{t_mid:g}", "ks-two-sample",
                             ks_two_sample(wmid, _radii(bm.at(t_mid)), level)))
        sizes["bm_meander"] = bm.count
        seeds["bm_meander"] = int(seed + 1)
        mid = f"radius-at-{t_mid:g}"
        raw.update({("max-norm", "walk"): wmax, ("max-norm", "bm-meander"): bm.running_max(SEG_NORM),
                    (mid, "walk"): wmid, (mid, "bm-meander"): _radii(bm.at(t_mid))})
    meta = _describe(cone, dist, x, n)
    meta.update({"eps": eps, "grid": m, "acceptance": ens.acceptance, "split_levels": split_levels,
                 "method": ens.metadata.get("method"), "level": level, "reference_degrees": k})
    return TestReport.from_checks("test-meander", checks, sizes, seeds, meta, raw)


def free_endpoints(dist: StepDistribution, x, n: int, count: int, seed: int) -> np.ndarray:
    """Endpoints x + S(n) of the unconditioned walk (no killing)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    runner = _Runner(_FreeCone(dist.dimension), dist, seed)
    _, _, _, final, _ = runner.run(np.broadcast_to(x, (count, len(x))), 0, n, np.arange(count, dtype=np.uint64))
    return final


@dataclass(frozen=True)
class _FreeCone:
    # the kernel's catch-all code: every point is inside
    dimension: int
    code: int = 6
    alpha: float = 0.0
    kind: str = "line"


def meander_negative_control(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, seed: int,
                             level: float = LEVEL) -> TestReport:
    """Unconditioned endpoint radius against the meander radial law; expected to fail."""
    check_start(cone, x)
    rng = np.random.default_rng([int(seed), 1])
    end = free_endpoints(dist, x, n, count, seed) / math.sqrt(n)
    from .increments import coordinate_cells

    cells = coordinate_cells(dist)
    if np.any(cells > 0):
        end = jitter(end, cells / math.sqrt(n), rng)
    k = exponent(cone) + cone.dimension
    res = ks_one_sample(_radii(end), sst.chi(k).cdf, level)
    meta = _describe(cone, dist, x, n)
    meta["control"] = "unconditioned endpoint"
    return TestReport.from_checks("test-meander-negative-control",
                                  [_check("endpoint-radius", "ks-one-sample", res, degrees=k)],
                                  {"walk": count}, {"walk": int(seed)}, meta,
                                  {("endpoint-radius", "free-walk"): _radii(end)})


def htransform_convergence_test(cone: ConeSpec, dist: StepDistribution, vtable: HarmonicTable, x, n: int,
                                count: int, seed: int, *, bessel_count: Optional[int] = None,
                                times=(0.25, 0.5, 1.0), bins: int = 20, level: float = LEVEL,
                                reference: bool = True) -> TestReport:
    """Scaled Doob-transformed walk against the Bessel process of dimension 2p + d started at 0.

    (i) |X(1)| against chi(2p + d); (ii) |X(t)| against exact Bessel
    marginals; (iii) the pairs (|X(1/2)|, |X(1)|) through the conditional CDF
    of the Bessel kernel, binned chi-square against uniform.
    """
    ts = sorted(set(float(t) for t in times) | {0.5, 1.0})
    ens = sample_htransform(cone, dist, vtable, x, n, count, seed, record=[int(n * t) for t in ts])
    law = RadialLaw.from_cone(cone)
    rng = np.random.default_rng([int(seed), 1])
    r = {t: _radii(_jittered_at(ens, t, rng)) for t in ts}
    checks = [_check("endpoint-radius", "ks-one-sample", ks_one_sample(r[1.0], sst.chi(law.degrees).cdf, level),
                     degrees=law.degrees)]
    sizes = {"walk": ens.count}
    seeds = {"walk": int(seed)}
    raw = {(f"radius-at-{t:g}", "walk"): r[t] for t in ts}
    if reference:
        bc = bessel_count or count
        bes = sample_bessel(law, 0.0, ts, bc, seed + 1)
        for j, t in enumerate(ts):
            checks.append(_check(f"radius-at-{t:g}", "ks-two-sample", ks_two_sample(r[t], bes.values[:, j + 1], level)))
            raw[(f"radius-at-{t:g}", "bessel")] = bes.values[:, j + 1]
        sizes["bessel"] = bc
        seeds["bessel"] = int(seed + 1)
    r1 = np.maximum(r[0.5], 1e-12)
    u = radial_transition_cdf(law, 0.5, r1, r[1.0])
    checks.append(_check("kernel-pit", "chi-square", chi_square_uniform(u, bins, level), bins=bins))
    raw[("kernel-pit", "walk")] = u
    meta = _describe(cone, dist, x, n)
    meta.update({"times": ts, "table_residual": float(vtable.relative_residual), "level": level,
                 "window_radius": float(vtable.window_radius), "reference_degrees": law.degrees})
    return TestReport.from_checks("test-htransform", checks, sizes, seeds, meta, raw)


def htransform_negative_control(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, seed: int,
                                level: float = LEVEL) -> TestReport:
    """Unconditioned endpoint radius against chi(2p + d); expected to fail."""
    check_start(cone, x)
    rng = np.random.default_rng([int(seed), 1])
    from .increments import coordinate_cells

    end = free_endpoints(dist, x, n, count, seed) / math.sqrt(n)
    cells = coordinate_cells(dist)
    if np.any(cells > 0):
        end = jitter(end, cells / math.sqrt(n), rng)
    law = RadialLaw.from_cone(cone)
    res = ks_one_sample(_radii(end), sst.chi(law.degrees).cdf, level)
    meta = _describe(cone, dist, x, n)
    meta["control"] = "unconditioned endpoint"
    return TestReport.from_checks("test-htransform-negative-control",
                                  [_check("endpoint-radius", "ks-one-sample", res, degrees=law.degrees)],
                                  {"walk": count}, {"walk": int(seed)}, meta,
                                  {("endpoint-radius", "free-walk"): _radii(end)})


def _mean(g):
    return float(np.mean(g))


def _wmean(g, w):
    return float((g * w).sum() / w.sum())


def bridge_convergence_test(cone: ConeSpec, dist: StepDistribution, x, y, n: int, t: float, count: int, seed: int,
                            *, bm_count: Optional[int] = None, eps: float = DEFAULT_EPS, m: int = DEFAULT_GRID,
                            resamples: int = 400, level: float = LEVEL, method: str = "auto",
                            reversal: bool = True) -> TestReport:
    """Prefix functionals of the bridge against the h(t, .)-weighted Brownian meander.

    For g in {|X(t)|, max_[0,t] |X|} the bridge mean is compared with
    E[g(t^(1/2) M) h(t, t^(1/2) M(1))] / E[h(t, t^(1/2) M(1))], using
    bootstrap bands.  With ``reversal`` and x = y the maxima over [0, 1/2]
    and [1/2, 1] (from disjoint halves of the ensemble) are compared by
    two-sample KS.
    """
    if not 0 < t < 1:
        raise InvalidInputError("t must lie in (0, 1)")
    rec = sorted({int(n * t), n // 2})
    br = sample_bridge(cone, dist, x, n, y, count, seed, method=method, record=rec)
    rng = np.random.default_rng([int(seed), 1])
    gb = {
        "value": _radii(_jittered_at(br, t, rng)),
        "max": _jittered_max(br, SEG_NORM, t, rng),
    }
    bmc = bm_count or count
    bm = sample_bm_meander(cone, m, eps, bmc, seed + 1, record="end")
    st = math.sqrt(t)
    w_end = bm.at(1.0)
    h = bridge_weight(cone, t, st * w_end)
    h = np.atleast_1d(h)
    gm = {"value": st * _radii(w_end), "max": st * bm.running_max(SEG_NORM)}
    checks = []
    raw = {}
    for i, name in enumerate(gb):
        raw[(name, "bridge")] = gb[name]
        raw[(name, "bm-meander")] = gm[name]
        raw[("weight", "bm-meander")] = h
        diff, band = bootstrap_band(_mean, (gb[name],), _wmean, (gm[name], h), resamples, level, seed + 2 + i)
        checks.append({"name": name, "kind": "bootstrap", "statistic": abs(diff), "threshold": band,
                       "passed": bool(abs(diff) <= band), "bridge_mean": float(np.mean(gb[name])),
                       "weighted_meander_mean": _wmean(gm[name], h)})
    xa = np.asarray(x, dtype=float).reshape(-1)
    ya = np.asarray(y, dtype=float).reshape(-1)
    if reversal and np.array_equal(xa, ya):
        half = br.count // 2
        first = _jittered_max(br, SEG_NORM, 0.5, rng)[:half]
        second = _jittered_max(br, SEG_NORM, 1.0, rng, t0=0.5)[half:]
        checks.append(_check("reversal-max-halves", "ks-two-sample", ks_two_sample(first, second, level)))
    meta = _describe(cone, dist, x, n)
    meta.update({"end": [float(v) for v in ya], "t": t, "eps": eps, "grid": m, "method": br.metadata.get("method"),
                 "bridge_probability": br.metadata.get("bridge_probability"), "resamples": resamples,
                 "level": level})
    return TestReport.from_checks("test-bridge", checks, {"bridge": br.count, "bm_meander": bm.count},
                                  {"bridge": int(seed), "bm_meander": int(seed + 1), "bootstrap": int(seed + 2)},
                                  meta, raw)


FEIERL_KINDS = {"max-top": SEG_TOP, "max-range": SEG_RANGE}


def feierl_functional(ens: Ensemble, kind: str = "max-top") -> np.ndarray:
    """max_k (x_d + S_d(k)) or max_k |x_d + S_d(k) - x_1 - S_1(k)|, scaled by sqrt(n)."""
    if ens.cone is None or ens.cone.kind not in (WEYL_A, WEYL_B):
        raise InvalidInputError("the functional is defined for Weyl chamber ensembles")
    if kind not in FEIERL_KINDS:
        raise InvalidInputError(f"kind must be one of {sorted(FEIERL_KINDS)}")
    return ens.running_max(FEIERL_KINDS[kind])


def _feierl_direction(d: int, kind: str) -> np.ndarray:
    w = np.zeros(d)
    w[-1] = 1.0
    if kind == "max-range":
        w[0] = -1.0
    return w


def feierl_universality_test(cone: ConeSpec, dist_a: StepDistribution, dist_b: StepDistribution, x, y, n: int,
                             count: int, seed: int, *, kind: str = "max-top", level: float = LEVEL,
                             corrected: bool = True) -> TestReport:
    """Two lattice laws in a Weyl chamber: rescaled bridge functionals compared by two-sample KS.

    A lattice maximum sits below the maximum of the continuous limit by a
    law-dependent constant (``ladder_offset``), a bias of order n^(-1/2)
    that differs between the two laws.  With ``corrected`` each law's
    offset is removed before the lattice jitter.
    """
    ea = sample_bridge(cone, dist_a, x, n, y, count, seed, record="end")
    eb = sample_bridge(cone, dist_b, x, n, y, count, seed + 1, record="end")
    rng = np.random.default_rng([int(seed), 1])
    col = FEIERL_KINDS.get(kind)
    fa = feierl_functional(ea, kind)
    fb = feierl_functional(eb, kind)
    w = _feierl_direction(cone.dimension, kind)
    off = {"a": 0.0, "b": 0.0}
    if corrected:
        off = {"a": ladder_offset(dist_a, w), "b": ladder_offset(dist_b, w)}
    fa = jitter(fa - off["a"] / ea.scale, _column_span(ea, col) / ea.scale, rng)
    fb = jitter(fb - off["b"] / eb.scale, _column_span(eb, col) / eb.scale, rng)
    res = ks_two_sample(fa, fb, level)
    meta = _describe(cone, dist_a, x, n)
    meta.update({"steps_b": str(dist_b), "end": [float(v) for v in np.ravel(y)], "kind": kind, "level": level,
                 "corrected": corrected, "ladder_offsets": off})
    return TestReport.from_checks("feierl-universality", [_check(kind, "ks-two-sample", res)],
                                  {"a": ea.count, "b": eb.count}, {"a": int(seed), "b": int(seed + 1)}, meta,
                                  {(kind, "a"): fa, (kind, "b"): fb})


@dataclass
class ExponentResult:
    horizons: np.ndarray
    survivals: np.ndarray
    std_errors: np.ndarray
    method: str
    fit: object
    report: TestReport


def survival_exponent(cone: ConeSpec, dist: StepDistribution, x, horizons, *, method: str = "auto",
                      replicas: int = 10**6, seed: int = 0, tol: float = 0.05) -> ExponentResult:
    """Survival probabilities on a horizon grid and the fitted log-log slope against -p/2."""
    hs = np.asarray(sorted(set(int(h) for h in horizons)), dtype=np.int64)
    if method == "auto":
        method = "exact" if dist.is_lattice else "mc"
    if method == "exact":
        surv, how = exact_survival(cone, dist, x, hs, return_method=True)
        se = np.zeros(len(hs))
        how = f"exact-{how}"
    elif method == "mc":
        est = [survival_probability_mc(cone, dist, x, int(h), replicas, seed) for h in hs]
        surv = np.array([e.probability for e in est])
        se = np.array([e.std_error for e in est])
        how = "monte-carlo"
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    fit = exponent_fit(np.stack([hs, surv], axis=1))
    target = -exponent(cone) / 2.0
    dev = abs(fit.slope - target)
    check = {"name": "slope", "kind": "tolerance", "statistic": dev, "threshold": tol, "passed": bool(dev <= tol),
             "slope": fit.slope, "target": target, "band": fit.band}
    meta = _describe(cone, dist, x, int(hs[-1]))
    meta.update({"horizons": [int(h) for h in hs], "method": how, "fit": fit.to_dict()})
    rep = TestReport.from_checks("survival-exponent", [check], {"replicas": replicas if how == "monte-carlo" else 0},
                                 {"mc": int(seed)}, meta)
    return ExponentResult(hs, np.asarray(surv, dtype=float), se, how, fit, rep)


CATALOGUE = (
    "half-line", "half-space:2", "half-space:3", "orthant:2", "orthant:3", "orthant:4", "wedge:0.7853981633974483",
    "wedge:1.5707963267948966", "wedge:2.5", "wedge:4.0", "weyl-a:2", "weyl-a:3", "weyl-a:4", "weyl-b:2", "weyl-b:3",
)


def interior_points(cone: ConeSpec, count: int, rng, margin: float = 0.05) -> np.ndarray:
    """Random points of K with |x| in [0.5, 2] and distance to the boundary at least margin |x|."""
    from .cones import contains, dist_to_boundary

    out = []
    while sum(len(o) for o in out) < count:
        g = rng.standard_normal((4 * count, cone.dimension))
        r = np.sqrt((g**2).sum(axis=1))
        g = g / r[:, None] * rng.uniform(0.5, 2.0, len(g))[:, None]
        keep = np.asarray(contains(cone, g)).reshape(-1)
        g = g[keep]
        keep = np.asarray(dist_to_boundary(cone, g)).reshape(-1) >= margin * np.sqrt((g**2).sum(axis=1))
        out.append(g[keep])
    return np.concatenate(out)[:count]


def boundary_points(cone: ConeSpec, count: int, rng) -> np.ndarray:
    """Random points on the boundary of K."""
    from .cones import HALF_LINE, HALF_SPACE, ORTHANT, WEDGE

    d = cone.dimension
    k = cone.kind
    if k == HALF_LINE:
        return np.zeros((count, 1))
    if k == WEDGE:
        r = rng.uniform(0.1, 3.0, count)
        th = np.where(rng.random(count) < 0.5, 0.0, cone.alpha)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    pts = np.abs(rng.standard_normal((count, d))) + 0.1
    if k == HALF_SPACE:
        pts = rng.standard_normal((count, d))
        pts[:, -1] = 0.0
    elif k == ORTHANT:
        pts[np.arange(count), rng.integers(0, d, count)] = 0.0
    else:
        pts = np.sort(np.cumsum(pts, axis=1), axis=1)
        if k == WEYL_A:
            pts -= pts.mean(axis=1, keepdims=True)
        face = rng.integers(-1 if k == WEYL_B else 0, d - 1, count)
        for i, f in enumerate(face):
            if f < 0:
                pts[i, 0] = 0.0
            else:
                pts[i, f + 1] = pts[i, f]
    return pts


def _fd_laplacian(cone, pts, h):
    from .cones import harmonic_polynomial

    d = cone.dimension
    base = np.asarray(harmonic_polynomial(cone, pts), dtype=float).reshape(-1)
    lap = np.zeros(len(pts))
    for c in range(d):
        e = np.zeros(d)
        e[c] = h
        lap += (np.asarray(harmonic_polynomial(cone, pts + e)).reshape(-1)
                + np.asarray(harmonic_polynomial(cone, pts - e)).reshape(-1) - 2 * base)
    return lap / (h * h), base


def catalogue_check(seed: int = 0, count: int = 1000, cones=CATALOGUE) -> TestReport:
    """Exponent identity, homogeneity, finite-difference harmonicity and boundary vanishing of u."""
    from .cones import lambda1, parse_cone, u_value

    rng = np.random.default_rng(seed)
    checks = []
    for text in cones:
        cone = parse_cone(text)
        p, d = exponent(cone), cone.dimension
        if d >= 2:
            lam = lambda1(cone)
            checks.append({"name": f"{text}:lambda1", "kind": "identity", "statistic": abs(lam - p * (p + d - 2)),
                           "threshold": 0.0, "passed": lam == p * (p + d - 2)})
        x = interior_points(cone, count, rng)
        ux = np.asarray(u_value(cone, x)).reshape(-1)
        worst = 0.0
        for c in (0.5, 2.0, 7.0):
            ucx = np.asarray(u_value(cone, c * x)).reshape(-1)
            worst = max(worst, float(np.max(np.abs(ucx - c**p * ux) / np.maximum(1.0, c**p * ux))))
        checks.append({"name": f"{text}:homogeneity", "kind": "tolerance", "statistic": worst, "threshold": 1e-9,
                       "passed": worst <= 1e-9})
        lap, base = _fd_laplacian(cone, x, 1e-3)
        r2 = (x**2).sum(axis=1)
        res = float(np.max(np.abs(lap) * r2 / np.abs(base)))
        checks.append({"name": f"{text}:harmonicity", "kind": "tolerance", "statistic": res, "threshold": 1e-5,
                       "passed": res < 1e-5})
        bpts = boundary_points(cone, count, rng)
        bu = np.abs(np.asarray(_harmonic_on(cone, bpts)))
        tol = 1e-12 if cone.kind == "wedge" else 0.0
        worst_b = float(bu.max())
        checks.append({"name": f"{text}:boundary", "kind": "tolerance", "statistic": worst_b, "threshold": tol,
                       "passed": worst_b <= tol})
    return TestReport.from_checks("exponent-catalogue", checks, {"points": count}, {"points": int(seed)},
                                  {"cones": list(cones)})


def _harmonic_on(cone, pts):
    # u on boundary points: the unclipped closed form, since points of the boundary are not in the open cone
    from .cones import harmonic_polynomial

    return np.asarray(harmonic_polynomial(cone, pts)).reshape(-1)


def harmonic_v_check(cone: ConeSpec, dist: StepDistribution, window: float, *, tol: float = 1e-10,
                     method: str = "jacobi", accuracy: float = 1e-6, mc_points=(), mc_n: int = 10**4,
                     replicas: int = 10**6, seed: int = 0, se_factor: float = 4.0) -> TestReport:
    """Build V on a window, compare with u on the inner half-window, and with Monte Carlo at chosen points."""
    from .cones import u_value
    from .harmonic import build_v_exact, estimate_v_mc

    tab = build_v_exact(cone, dist, window, tol, method=method)
    pts = tab.interior_points()
    inner = pts[np.sqrt((pts**2).sum(axis=1)) <= window / 2]
    v = np.array([tab.value(p) for p in inner])
    u = np.asarray(u_value(cone, inner.astype(float))).reshape(-1)
    rel = float(np.max(np.abs(v / u - 1.0)))
    checks = [
        {"name": "residual", "kind": "tolerance", "statistic": tab.relative_residual, "threshold": tol,
         "passed": tab.relative_residual <= tol},
        {"name": "v-over-u-inner-half", "kind": "tolerance", "statistic": rel, "threshold": accuracy,
         "passed": rel < accuracy},
    ]
    for i, x in enumerate(mc_points):
        mean, se = estimate_v_mc(cone, dist, x, mc_n, replicas, seed + i)
        vx = tab.value(x)
        dev, band = abs(mean - vx), se_factor * se
        checks.append({"name": f"mc-at-{list(map(int, x))}", "kind": "standard-errors", "statistic": dev,
                       "threshold": band, "passed": dev <= band, "mc_mean": mean, "mc_se": se, "table": vx})
    meta = _describe(cone, dist, mc_points[0] if len(mc_points) else [0] * cone.dimension, mc_n)
    meta.update({"window": window, "tol": tol, "method": method, "sweeps": tab.sweeps})
    return TestReport.from_checks("harmonic-v", checks, {"replicas": replicas}, {"mc": int(seed)}, meta)


def reference_analytics_check(*, identity_samples: int = 10**5, identity_seed: int = 0, eps: float = DEFAULT_EPS,
                              m: int = DEFAULT_GRID, identity: bool = True) -> TestReport:
    """Normalization, Chapman-Kolmogorov and the half-integer closed form of the Bessel kernel,
    plus the limit identity for the u-transformed Brownian motion on the half-line."""
    from scipy import integrate

    from .cones import half_line
    from .reference import entrance_law_density, htransform_limit_identity_check, radial_transition_density

    checks = []
    worst = 0.0
    for k in (3.0, 4.0, 7.0):
        v, _ = integrate.quad(lambda r: entrance_law_density(k, 1.0, r), 0, np.inf, epsabs=1e-13, epsrel=1e-12)
        worst = max(worst, abs(v - 1))
        v, _ = integrate.quad(lambda r: entrance_law_density(k, 0.3, r), 0, np.inf, epsabs=1e-13, epsrel=1e-12)
        worst = max(worst, abs(v - 1))
    checks.append({"name": "entrance-normalization", "kind": "tolerance", "statistic": worst, "threshold": 1e-7,
                   "passed": worst <= 1e-7})
    worst = 0.0
    for k in (3.0, 4.0, 7.0):
        law = RadialLaw.of_dimension(k)
        for h in (0.1, 1.0):
            for r1 in (0.5, 2.0):
                v, _ = integrate.quad(lambda r: radial_transition_density(law, h, r1, r), 0, np.inf, epsabs=1e-13,
                                      epsrel=1e-12, limit=200)
                worst = max(worst, abs(v - 1))
    checks.append({"name": "kernel-normalization", "kind": "tolerance", "statistic": worst, "threshold": 1e-7,
                   "passed": worst <= 1e-7})
    worst = 0.0
    for k in (3.0, 6.0):
        law = RadialLaw.of_dimension(k)
        for r1, r2 in ((0.5, 1.0), (1.0, 1.5), (2.0, 0.7)):
            v, _ = integrate.quad(lambda mm: radial_transition_density(law, 0.3, r1, mm)
                                  * radial_transition_density(law, 0.7, mm, r2), 0, np.inf, epsabs=1e-13, limit=200)
            worst = max(worst, abs(v - radial_transition_density(law, 1.0, r1, r2)))
    checks.append({"name": "chapman-kolmogorov", "kind": "tolerance", "statistic": worst, "threshold": 1e-6,
                   "passed": worst <= 1e-6})
    law = RadialLaw.of_dimension(3.0)
    worst = 0.0
    for h, r1, r2 in ((1.0, 1.0, 1.0), (0.5, 0.3, 2.0), (2.0, 3.0, 0.4)):
        z = r1 * r2 / h
        closed = (r2 / r1) ** 0.5 * (r2 / h) * math.exp(-(r1 * r1 + r2 * r2) / (2 * h)) * math.sqrt(
            2 / (math.pi * z)) * math.sinh(z)
        got = radial_transition_density(law, h, r1, r2)
        worst = max(worst, abs(got - closed) / closed)
    checks.append({"name": "half-integer-closed-form", "kind": "tolerance", "statistic": worst, "threshold": 1e-12,
                   "passed": worst <= 1e-12})
    sizes, seeds = {}, {}
    if identity:
        rep = htransform_limit_identity_check(half_line(), eps, identity_samples, identity_seed, m=m)
        checks.append({"name": "h-transform-limit-identity", "kind": "bootstrap", "statistic": rep.statistic,
                       "threshold": rep.threshold, "passed": rep.passed, "functionals": rep.functionals,
                       "hbm": rep.hbm_estimates, "meander": rep.meander_estimates, "bands": rep.bands})
        sizes["identity"] = identity_samples
        seeds["identity"] = int(identity_seed)
    return TestReport.from_checks("reference-analytics", checks, sizes, seeds, {"eps": eps, "grid": m})


def bridge_identity_check(cone: ConeSpec, dist: StepDistribution, x, y, horizons, t: float = 0.5, *,
                          sample_n: int = 4, sample_count: int = 10**5, seed: int = 0,
                          tv_exact: float = 1e-12, tv_sampled: float = 0.01) -> TestReport:
    """Exact prefix identity at each horizon and the sampled bridge against its enumerated law."""
    from .lattice_dp import bridge_prefix_identity, enumerate_paths
    from .stats import empirical_law, tv_distance

    checks = []
    for n in horizons:
        left, right = bridge_prefix_identity(cone, dist, x, y, int(n), t)
        tv = tv_distance(left, right)
        checks.append({"name": f"prefix-identity-n{int(n)}", "kind": "tolerance", "statistic": tv,
                       "threshold": tv_exact, "passed": tv <= tv_exact})
    from .increments import integer_support

    atoms, _ = integer_support(dist)
    xi = np.asarray(x, dtype=np.int64)
    yi = np.asarray(y, dtype=np.int64)
    exact, total = {}, 0.0
    for seq, pr, ex in enumerate_paths(cone, dist, xi, sample_n):
        if ex is None:
            path = xi + np.cumsum(atoms[list(seq)], axis=0)
            if np.array_equal(path[-1], yi):
                key = tuple(float(v) for v in path.ravel())
                exact[key] = exact.get(key, 0.0) + pr
                total += pr
    exact = {k: v / total for k, v in exact.items()}
    ens = sample_bridge(cone, dist, x, sample_n, y, sample_count, seed, record="full")
    emp = empirical_law(ens.positions[:, 1:].reshape(ens.count, -1))
    tv = tv_distance(exact, emp)
    checks.append({"name": f"sampled-bridge-n{sample_n}", "kind": "tolerance", "statistic": tv,
                   "threshold": tv_sampled, "passed": tv < tv_sampled, "paths": len(exact),
                   "method": ens.metadata.get("method")})
    meta = _describe(cone, dist, x, max(int(h) for h in horizons))
    meta.update({"end": [float(v) for v in np.ravel(y)], "t": t, "horizons": [int(h) for h in horizons]})
    return TestReport.from_checks("bridge-identity", checks, {"sampled": sample_count}, {"sampled": int(seed)}, meta)
