"""Catalogue of cones with closed-form positive harmonic functions.

Every cone K here is open; a point on the boundary counts as outside.
Each kind carries its harmonic function ``u`` (positive in K, zero on the
boundary, homogeneous of degree ``p``) and the exponent ``p`` itself.

Point arguments accept a single point of shape ``(d,)`` or a batch of shape
``(N, d)``; scalars come back for single points and arrays for batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, UnsupportedError

HALF_LINE = "half-line"
HALF_SPACE = "half-space"
ORTHANT = "orthant"
WEDGE = "wedge"
WEYL_A = "weyl-a"
WEYL_B = "weyl-b"
# Internal: the whole space, used for unconstrained coordinates of product walks.
LINE = "line"

KINDS = (HALF_LINE, HALF_SPACE, ORTHANT, WEDGE, WEYL_A, WEYL_B)

# integer codes understood by the compiled kernels
KIND_CODES = {HALF_LINE: 0, HALF_SPACE: 1, ORTHANT: 2, WEDGE: 3, WEYL_A: 4, WEYL_B: 5, LINE: 6}


@dataclass(frozen=True)
class ConeSpec:
    kind: str
    dimension: int
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS and self.kind != LINE:
            raise InvalidInputError(f"unknown cone kind {self.kind!r}")
        if self.dimension < 1:
            raise InvalidInputError("cone dimension must be positive")
        if self.kind == HALF_LINE and self.dimension != 1:
            raise InvalidInputError("half-line is one-dimensional")
        if self.kind == WEDGE:
            if self.dimension != 2:
                raise InvalidInputError("wedges are two-dimensional")
            a = self.alpha
            if a is None or not math.isfinite(a) or not 0.0 < a < 2.0 * math.pi:
                raise InvalidInputError(f"wedge opening must lie in (0, 2*pi), got {a!r}")
        elif self.alpha is not None:
            raise InvalidInputError(f"{self.kind} takes no opening angle")
        if self.kind in (WEYL_A, WEYL_B) and self.dimension < 2:
            raise InvalidInputError("Weyl chambers need d >= 2")

    @property
    def d(self) -> int:
        return self.dimension

    @property
    def exponent(self) -> float:
        return exponent(self)

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    def __str__(self):
        return format_cone(self)


def half_line() -> ConeSpec:
    return ConeSpec(HALF_LINE, 1)


def half_space(d: int) -> ConeSpec:
    return ConeSpec(HALF_SPACE, int(d))


def orthant(d: int) -> ConeSpec:
    return ConeSpec(ORTHANT, int(d))


def wedge(alpha: float) -> ConeSpec:
    return ConeSpec(WEDGE, 2, float(alpha))


def weyl_a(d: int) -> ConeSpec:
    return ConeSpec(WEYL_A, int(d))


def weyl_b(d: int) -> ConeSpec:
    return ConeSpec(WEYL_B, int(d))


def whole_line() -> ConeSpec:
    return ConeSpec(LINE, 1)


def parse_cone(text: str) -> ConeSpec:
    """Parse ``half-line``, ``half-space:d``, ``orthant:d``, ``wedge:alpha``,
    ``weyl-a:d`` or ``weyl-b:d``."""
    text = text.strip().lower()
    name, _, arg = text.partition(":")
    try:
        if name == HALF_LINE:
            if arg and int(arg) != 1:
                raise InvalidInputError("half-line takes no dimension")
            return half_line()
        if name == WEDGE:
            if not arg:
                raise InvalidInputError("wedge needs an opening angle, e.g. wedge:1.5707963")
            return wedge(float(arg))
        if name in (HALF_SPACE, ORTHANT, WEYL_A, WEYL_B):
            if not arg:
                raise InvalidInputError(f"{name} needs a dimension, e.g. {name}:2")
            return ConeSpec(name, int(arg))
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed cone {text!r}: {exc}") from None
    raise InvalidInputError(f"unknown cone {text!r}")


def format_cone(cone: ConeSpec) -> str:
    if cone.kind == HALF_LINE:
        return HALF_LINE
    if cone.kind == WEDGE:
        return f"{WEDGE}:{cone.alpha!r}"
    return f"{cone.kind}:{cone.dimension}"


def exponent(cone: ConeSpec) -> float:
    k, d = cone.kind, cone.dimension
    if k in (HALF_LINE, HALF_SPACE):
        return 1.0
    if k == ORTHANT:
        return float(d)
    if k == WEDGE:
        return math.pi / cone.alpha
    if k == WEYL_A:
        return d * (d - 1) / 2.0
    if k == WEYL_B:
        return float(d * d)
    raise UnsupportedError(f"no exponent for {k}")


def lambda1(cone: ConeSpec) -> float:
    """First Dirichlet eigenvalue of the spherical Laplacian on the cone's section."""
    if cone.dimension < 2:
        raise UnsupportedError("lambda1 is undefined for d = 1 (the 0-sphere is degenerate)")
    p = exponent(cone)
    return p * (p + cone.dimension - 2)


def interior_direction(cone: ConeSpec) -> np.ndarray:
    """A unit vector inside K, used as the start direction near the vertex."""
    k, d = cone.kind, cone.dimension
    if k == HALF_LINE:
        v = np.ones(1)
    elif k == HALF_SPACE:
        v = np.zeros(d)
        v[-1] = 1.0
    elif k == ORTHANT:
        v = np.ones(d)
    elif k == WEDGE:
        v = np.array([math.cos(cone.alpha / 2), math.sin(cone.alpha / 2)])
    elif k == WEYL_A:
        v = np.arange(d, dtype=float) - (d - 1) / 2.0
    elif k == WEYL_B:
        v = np.arange(1, d + 1, dtype=float)
    else:
        raise UnsupportedError(k)
    return v / np.linalg.norm(v)


def _as_points(cone: ConeSpec, x):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    arr = np.atleast_2d(arr) if arr.ndim == 1 else arr
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.shape[-1] != cone.dimension:
        raise InvalidInputError(
            f"point has dimension {arr.shape[-1]}, cone {format_cone(cone)} has {cone.dimension}"
        )
    return arr.reshape(-1, cone.dimension), single, arr.shape[:-1]


def _finish(values, single, shape):
    if single:
        v = values[0]
        return v.item() if hasattr(v, "item") else v
    return values.reshape(shape)


def _angle(pts):
    th = np.arctan2(pts[:, 1], pts[:, 0])
    return np.where(th < 0, th + 2 * math.pi, th)


def _contains(cone, pts):
    k = cone.kind
    if k == HALF_LINE:
        return pts[:, 0] > 0
    if k == HALF_SPACE:
        return pts[:, -1] > 0
    if k == ORTHANT:
        return np.all(pts > 0, axis=1)
    if k == WEDGE:
        th = _angle(pts)
        nonzero = (pts[:, 0] != 0) | (pts[:, 1] != 0)
        return nonzero & (th > 0) & (th < cone.alpha)
    if k == WEYL_A:
        return np.all(np.diff(pts, axis=1) > 0, axis=1)
    if k == WEYL_B:
        return (pts[:, 0] > 0) & np.all(np.diff(pts, axis=1) > 0, axis=1)
    if k == LINE:
        return np.ones(len(pts), dtype=bool)
    raise UnsupportedError(k)


def contains(cone: ConeSpec, x):
    """True iff x lies in the open cone."""
    pts, single, shape = _as_points(cone, x)
    return _finish(_contains(cone, pts), single, shape)


def harmonic_polynomial(cone: ConeSpec, x):
    """The closed form of u evaluated without clipping to the cone.

    Outside K the polynomial kinds may be negative; this is what finite
    difference checks need. Use :func:`u_value` for the clipped function.
    """
    pts, single, shape = _as_points(cone, x)
    return _finish(_harmonic_raw(cone, pts), single, shape)


def _harmonic_raw(cone, pts):
    k, d = cone.kind, cone.dimension
    if k in (HALF_LINE, HALF_SPACE):
        return pts[:, -1].copy()
    if k == ORTHANT:
        return np.prod(pts, axis=1)
    if k == WEDGE:
        q = math.pi / cone.alpha
        r = np.hypot(pts[:, 0], pts[:, 1])
        # 2**(1-q) makes wedge(pi/2) agree with orthant(2) and wedge(pi) with half-space(2)
        return 2.0 ** (1.0 - q) * r**q * np.sin(q * _angle(pts))
    if k == WEYL_A:
        out = np.ones(len(pts))
        for i in range(d):
            for j in range(i + 1, d):
                out *= pts[:, j] - pts[:, i]
        return out
    if k == WEYL_B:
        out = np.prod(pts, axis=1)
        sq = pts * pts
        for i in range(d):
            for j in range(i + 1, d):
                out *= sq[:, j] - sq[:, i]
        return out
    raise UnsupportedError(k)


def u_value(cone: ConeSpec, x):
    """Positive harmonic function of K, zero on and outside the boundary."""
    pts, single, shape = _as_points(cone, x)
    vals = np.where(_contains(cone, pts), _harmonic_raw(cone, pts), 0.0)
    return _finish(vals, single, shape)


def _dist_to_ray(pts, phi):
    # distance from points to the closed ray {t (cos phi, sin phi), t >= 0}
    c, s = math.cos(phi), math.sin(phi)
    along = pts[:, 0] * c + pts[:, 1] * s
    perp = np.abs(-pts[:, 0] * s + pts[:, 1] * c)
    return np.where(along > 0, perp, np.hypot(pts[:, 0], pts[:, 1]))


def dist_to_boundary(cone: ConeSpec, x):
    """Euclidean distance to the boundary of K; zero for points not in K."""
    pts, single, shape = _as_points(cone, x)
    inside = _contains(cone, pts)
    k = cone.kind
    if k in (HALF_LINE, HALF_SPACE):
        dist = pts[:, -1].copy()
    elif k == ORTHANT:
        dist = pts.min(axis=1)
    elif k == WEDGE:
        dist = np.minimum(_dist_to_ray(pts, 0.0), _dist_to_ray(pts, cone.alpha))
    elif k in (WEYL_A, WEYL_B):
        gaps = np.diff(pts, axis=1) / math.sqrt(2.0)
        dist = gaps.min(axis=1)
        if k == WEYL_B:
            dist = np.minimum(dist, pts[:, 0])
    elif k == LINE:
        dist = np.full(len(pts), np.inf)
    else:
        raise UnsupportedError(k)
    return _finish(np.where(inside, dist, 0.0), single, shape)


def reflection_sign_pairs(cone: ConeSpec):
    """Coordinates that evolve independently under product steps.

    Returns a list of per-coordinate one-dimensional constraints (``HALF_LINE``
    or ``LINE``) when K is a product of half-lines and lines, else ``None``.
    """
    if cone.kind == HALF_LINE:
        return [HALF_LINE]
    if cone.kind == ORTHANT:
        return [HALF_LINE] * cone.dimension
    if cone.kind == HALF_SPACE:
        return [LINE] * (cone.dimension - 1) + [HALF_LINE]
    return None
