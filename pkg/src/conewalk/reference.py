"""Limit objects: grid Brownian meander, u-transformed Brownian motion, entrance law,
the radial Bessel reduction and the bridge weight."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .bessel import log_iv
from .cones import (
    HALF_LINE, HALF_SPACE, ORTHANT, WEDGE, WEYL_A, WEYL_B, ConeSpec, exponent, interior_direction, u_value,
)
from .engine import ACCEPTANCE_FLOOR, rejection_ensemble
from .ensemble import Ensemble
from .errors import InvalidInputError
from .increments import gaussian

DEFAULT_EPS = 0.01
DEFAULT_GRID = 4096
# -zeta(1/2) / sqrt(2 pi): mean overshoot shift of a Gaussian walk monitored on a grid
BOUNDARY_SHIFT = 0.5825971579390106


def face_normals(cone: ConeSpec) -> np.ndarray:
    """Inward unit normals of the faces of a polyhedral catalogue cone."""
    k, d = cone.kind, cone.dimension
    rows = []
    if k in (HALF_LINE, ORTHANT):
        rows = list(np.eye(d))
    elif k == HALF_SPACE:
        rows = [np.eye(d)[-1]]
    elif k == WEDGE:
        a = cone.alpha
        rows = [np.array([0.0, 1.0]), np.array([math.sin(a), -math.cos(a)])]
    elif k in (WEYL_A, WEYL_B):
        if k == WEYL_B:
            rows.append(np.eye(d)[0])
        for i in range(d - 1):
            v = np.zeros(d)
            v[i], v[i + 1] = -1.0, 1.0
            rows.append(v / math.sqrt(2.0))
    else:
        raise InvalidInputError(f"no faces for {cone}")
    return np.array(rows)


def boundary_shift(cone: ConeSpec) -> np.ndarray:
    """Translation v (in grid units) moving every face inward by BOUNDARY_SHIFT.

    A Gaussian walk kept inside K on the grid behaves like Brownian motion
    kept inside K - v; adding v to its positions corrects the discrete
    monitoring bias to first order.
    """
    N = face_normals(cone)
    v = np.linalg.lstsq(N, np.ones(len(N)), rcond=None)[0]
    return BOUNDARY_SHIFT * v


@dataclass(frozen=True)
class RadialLaw:
    """Bessel process of dimension ``degrees``; ``index`` = degrees / 2 - 1."""

    degrees: float
    index: float

    def __post_init__(self):
        if not self.degrees > 1:
            raise InvalidInputError("Bessel dimension must exceed 1")
        if abs(self.index - (self.degrees / 2.0 - 1.0)) > 1e-12:
            raise InvalidInputError("index must equal degrees / 2 - 1")

    @classmethod
    def of_dimension(cls, degrees: float) -> "RadialLaw":
        return cls(float(degrees), float(degrees) / 2.0 - 1.0)

    @classmethod
    def from_cone(cls, cone: ConeSpec) -> "RadialLaw":
        """delta = 2p + d, index p + d/2 - 1."""
        p, d = exponent(cone), cone.dimension
        return cls(2.0 * p + d, p + d / 2.0 - 1.0)


@dataclass
class RadialPaths:
    """Radial paths on a time grid starting at 0."""

    times: np.ndarray
    values: np.ndarray
    law: RadialLaw
    start: float
    seed: int


def _degrees(cone_or_k) -> float:
    if isinstance(cone_or_k, ConeSpec):
        return 2.0 * exponent(cone_or_k) + cone_or_k.dimension
    if isinstance(cone_or_k, RadialLaw):
        return cone_or_k.degrees
    return float(cone_or_k)


def entrance_law_density(cone_or_k, t: float, r):
    """Density of |B(t)| under the u-transform started at the vertex.

    With k = 2p + d, f_t(r) = r^(k-1) e^(-r^2/2t) / (t^(k/2) 2^(k/2-1) Gamma(k/2)).
    Accepts a cone, a RadialLaw or k itself.
    """
    if not t > 0:
        raise InvalidInputError("t must be positive")
    k = _degrees(cone_or_k)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidInputError("r must be nonnegative")
    with np.errstate(divide="ignore"):
        logf = ((k - 1) * np.log(r) - r * r / (2 * t) - (k / 2) * math.log(t) - (k / 2 - 1) * math.log(2)
                - gammaln(k / 2))
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def entrance_law_cdf(cone_or_k, t: float, r):
    """CDF of the entrance law: a scaled chi distribution with k degrees of freedom."""
    from scipy.stats import chi

    return chi.cdf(np.asarray(r, dtype=float) / math.sqrt(t), _degrees(cone_or_k))


def radial_transition_density(law: RadialLaw, h: float, r1, r2):
    """Bessel transition density q_h(r1, r2) = (r2/r1)^a (r2/h) e^(-(r1^2+r2^2)/2h) I_a(r1 r2/h)."""
    if not h > 0:
        raise InvalidInputError("h must be positive")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.any(r1 <= 0) or np.any(r2 <= 0):
        raise InvalidInputError("radii must be positive")
    r1, r2 = np.broadcast_arrays(r1, r2)
    a = law.index
    z = r1 * r2 / h
    logq = (a * (np.log(r2) - np.log(r1)) + np.log(r2 / h) - (r1 * r1 + r2 * r2) / (2 * h)
            + log_iv(a, z.ravel()).reshape(z.shape))
    out = np.exp(logq)
    return float(out) if out.ndim == 0 else out


def radial_transition_cdf(law: RadialLaw, h: float, r1, r2):
    """P(R_h <= r2 | R_0 = r1): R^2/h is noncentral chi-square(delta, r1^2/h)."""
    from scipy.stats import ncx2

    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return ncx2.cdf(r2 * r2 / h, law.degrees, r1 * r1 / h)


def sample_bessel(law: RadialLaw, r0: float, times, count: int, seed: int) -> RadialPaths:
    """Exact Bessel paths at the given times.

    Over a step h the squared radius is h times a noncentral chi-square with
    ``degrees`` freedoms and noncentrality r^2 / h, drawn as a Poisson mixture
    of Gamma laws.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise InvalidInputError("times must be positive and increasing")
    if r0 < 0:
        raise InvalidInputError("r0 must be nonnegative")
    if r0 == 0 and law.degrees < 2:
        raise InvalidInputError("entrance from 0 needs dimension at least 2")
    rng = np.random.default_rng(int(seed))
    grid = np.concatenate([[0.0], t])
    out = np.empty((count, len(grid)))
    out[:, 0] = r0
    sq = np.full(count, float(r0) ** 2)
    for j in range(1, len(grid)):
        h = grid[j] - grid[j - 1]
        pois = rng.poisson(sq / (2 * h))
        sq = h * 2.0 * rng.gamma(law.degrees / 2.0 + pois)
        out[:, j] = np.sqrt(sq)
    return RadialPaths(grid, out, law, float(r0), int(seed))


def sample_bm_meander(cone: ConeSpec, m: int = DEFAULT_GRID, eps: float = DEFAULT_EPS, count: int = 10**4,
                      seed: int = 0, *, record="quarters", floor: float = ACCEPTANCE_FLOOR,
                      corrected: bool = True) -> Ensemble:
    """Grid Brownian meander on [0, 1]: Gaussian grid paths from eps * x0 kept when all grid points lie in K.

    The ensemble is in grid units with scale sqrt(m), so ``at(t)`` returns
    the meander at time t.  With ``corrected`` every position (the start
    included) is translated by ``boundary_shift`` so that the paths
    approximate Brownian motion kept in K at all times rather than at grid
    times only.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    m = int(m)
    if m < 1:
        raise InvalidInputError("grid size must be positive")
    v = boundary_shift(cone) if corrected else np.zeros(cone.dimension)
    x0 = interior_direction(cone) * eps * math.sqrt(m)
    ens = rejection_ensemble(cone, gaussian(cone.dimension), x0 + v, m, count, seed, record=record,
                             law="bm-meander", floor=floor, shift=v)
    ens.metadata.update({"eps": float(eps), "grid": m, "corrected": bool(corrected)})
    return ens


def sample_h_bm(cone: ConeSpec, x, horizon: float = 1.0, m: int = DEFAULT_GRID, count: int = 10**4, seed: int = 0,
                *, record="quarters", floor: float = ACCEPTANCE_FLOOR, corrected: bool = True) -> Ensemble:
    """Grid paths of Brownian motion from x surviving on [0, T], weighted by u(x + B(T)) / u(x).

    Positions are in grid units: ``at(t)`` returns x + B(tT) with scale
    sqrt(m / T).  Use self-normalized weights downstream.  ``corrected``
    translates the paths by ``boundary_shift`` as in sample_bm_meander.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not horizon > 0:
        raise InvalidInputError("horizon must be positive")
    m = int(m)
    scale = math.sqrt(m / horizon)
    v = boundary_shift(cone) if corrected else np.zeros(cone.dimension)
    ens = rejection_ensemble(cone, gaussian(cone.dimension), x * scale + v, m, count, seed, record=record,
                             law="h-bm", floor=floor, shift=v)
    ens.scale = scale
    ux = float(u_value(cone, ens.start / scale))
    ens.weights = np.asarray(u_value(cone, ens.final() / scale)).reshape(-1) / ux
    if not np.any(ens.weights > 0):
        raise InvalidInputError("all weights vanish")
    ens.metadata.update({"grid": m, "horizon_time": float(horizon), "corrected": bool(corrected)})
    return ens


def bridge_weight(cone: ConeSpec, t: float, w):
    """h(t, w) = t^(-p/2) (1-t)^(-p/2-d/2) u(w) e^(-|w|^2 / 2(1-t)), with the constant set to 1."""
    if not 0 < t < 1:
        raise InvalidInputError("t must lie in (0, 1)")
    p, d = exponent(cone), cone.dimension
    w = np.asarray(w, dtype=float)
    pts = w.reshape(-1, d)
    uw = np.asarray(u_value(cone, pts), dtype=float).reshape(-1)
    r2 = (pts**2).sum(axis=1)
    out = uw * np.exp(-r2 / (2 * (1 - t)) - (p / 2) * math.log(t) - (p / 2 + d / 2) * math.log(1 - t))
    return float(out[0]) if w.ndim <= 1 else out.reshape(w.shape[:-1])


def wedge_heat_kernel(alpha: float, h: float, x, z, terms: int = 200):
    """Dirichlet heat kernel of the planar wedge of opening alpha by its eigen-series.

    p_h(x, z) = (2 / (alpha h)) e^(-(r^2+s^2)/2h) sum_j I_(j pi/alpha)(r s / h) sin(j pi a/alpha) sin(j pi b/alpha)
    for x = r e^(ia), z = s e^(ib).
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r, a = math.hypot(*x), math.atan2(x[1], x[0]) % (2 * math.pi)
    zz = np.atleast_2d(z)
    s = np.hypot(zz[:, 0], zz[:, 1])
    b = np.arctan2(zz[:, 1], zz[:, 0]) % (2 * math.pi)
    arg = r * s / h
    base = -(r * r + s * s) / (2 * h)
    tot = np.zeros(len(s))
    for j in range(1, terms + 1):
        nu = j * math.pi / alpha
        tot += np.exp(log_iv(nu, arg) + base) * math.sin(nu * a) * np.sin(nu * b)
    out = 2.0 / (alpha * h) * tot
    out[(b <= 0) | (b >= alpha)] = 0.0
    return float(out[0]) if z.ndim == 1 else out


@dataclass
class IdentityReport:
    functionals: list
    hbm_estimates: list
    meander_estimates: list
    bands: list
    statistic: float
    threshold: float
    passed: bool
    metadata: dict


def _functionals(ens: Ensemble, cap: float = 4.0):
    end = ens.positions[:, -1] / ens.scale
    out = {"one": np.ones(ens.count)}
    for c in range(ens.d):
        out[f"end_{c + 1}"] = np.clip(end[:, c], -cap, cap)
    out["end_norm"] = np.minimum(np.sqrt((end**2).sum(axis=1)), cap)
    out["max_norm"] = np.minimum(ens.running_max(0), cap)
    return out


def _self_normalized(w, f):
    return float((w * f).sum() / w.sum())


def htransform_limit_identity_check(cone: ConeSpec, eps: float = DEFAULT_EPS, samples: int = 10**5, seed: int = 0,
                                    *, m: int = DEFAULT_GRID, meander: Ensemble = None, resamples: int = 400,
                                    level: float = 0.01) -> IdentityReport:
    """Compare the u-transformed Brownian motion from eps x0 with the u(M(1))-weighted meander.

    Both sides are self-normalized estimates of bounded functionals; the band
    for each difference is the (1 - level) bootstrap quantile of its
    deviation.  statistic = max |difference| / band, threshold 1.
    """
    if meander is not None and meander.cone != cone:
        raise InvalidInputError("the meander ensemble belongs to a different cone")
    x0 = interior_direction(cone) * eps
    hbm = sample_h_bm(cone, x0, 1.0, m, samples, seed)
    if meander is None:
        meander = sample_bm_meander(cone, m, eps / 2, samples, seed + 1)
    wm = np.asarray(u_value(cone, meander.final() / meander.scale)).reshape(-1)
    fa, fb = _functionals(hbm), _functionals(meander)
    rng = np.random.default_rng(seed + 2)
    names, ea, eb, bands, scores = [], [], [], [], []
    for name in fa:
        a = _self_normalized(hbm.weights, fa[name])
        b = _self_normalized(wm, fb[name])
        boot = np.empty(resamples)
        for i in range(resamples):
            ia = rng.integers(0, hbm.count, hbm.count)
            ib = rng.integers(0, meander.count, meander.count)
            boot[i] = _self_normalized(hbm.weights[ia], fa[name][ia]) - _self_normalized(wm[ib], fb[name][ib])
        band = float(np.quantile(np.abs(boot - (a - b)), 1 - level))
        names.append(name)
        ea.append(a)
        eb.append(b)
        bands.append(band)
        scores.append(0.0 if band == 0 and a == b else abs(a - b) / band if band > 0 else math.inf)
    stat = float(max(scores))
    return IdentityReport(
        names, ea, eb, bands, stat, 1.0, stat <= 1.0,
        {"cone": str(cone), "eps": eps, "grid": m, "samples": samples, "seed": seed, "resamples": resamples},
    )
