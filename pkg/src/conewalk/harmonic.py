"""The discrete harmonic function V of a lattice walk killed at leaving the cone.

V is characterized as the positive solution of V(x) = E[V(x + X); x + X in K]
with V ~ u at infinity.  On a window |x| <= R the fixed point is solved with
Dirichlet data V = u on the annulus R < |x| <= R + rho, rho the step radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import _kernels as K
from .cones import ConeSpec, contains, u_value
from .engine import _Runner, check_start
from .errors import ConvergenceError, InvalidInputError, UnsupportedError
from .increments import StepDistribution, integer_support
from .lattice_dp import Box, _positive_coords


@dataclass
class HarmonicTable:
    """V on the box ``box``; ``interior`` marks the unknowns |x| <= R inside K."""

    cone: ConeSpec
    dist: StepDistribution
    window_radius: float
    box: Box
    values: np.ndarray
    interior: np.ndarray
    residual: float
    relative_residual: float
    tol: float
    sweeps: int
    method: str
    anchor_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.atoms, self.probs = integer_support(self.dist)

    def _flat(self, z):
        z = np.asarray(z)
        return int(((z - self.box.lo) * self.box.strides).sum())

    def value(self, x) -> float:
        """V(x); zero outside the cone, error outside the window."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.cone.dimension:
            raise InvalidInputError("dimension mismatch")
        if not contains(self.cone, x):
            return 0.0
        xi = np.round(x).astype(np.int64)
        if np.any(np.abs(x - xi) > 1e-12) or not self.box.holds(xi):
            raise InvalidInputError(f"{x.tolist()} is not a lattice point of the window")
        return float(self.values[self.box.index(xi)])

    def interior_points(self) -> np.ndarray:
        return self.box.points()[self.interior.ravel()]

    def kernel_row(self, x):
        """Transition weights p(w) V(x + w) / V(x) of the transformed walk at x."""
        v0 = self.value(x)
        if v0 <= 0:
            raise InvalidInputError(f"V vanishes at {np.asarray(x).tolist()}")
        x = np.asarray(x, dtype=float)
        return np.array([p * self.value(x + w) / v0 for w, p in zip(self.atoms, self.probs)])

    def rows(self):
        """(points, values) for every cone point of the box with V > 0."""
        pts = self.box.points()
        flat = self.values.ravel()
        keep = flat > 0
        return pts[keep], flat[keep]

    def sidecar(self) -> dict:
        return {
            "cone": str(self.cone),
            "steps": str(self.dist),
            "window_radius": float(self.window_radius),
            "residual": float(self.residual),
            "relative_residual": float(self.relative_residual),
            "tol": float(self.tol),
            "sweeps": int(self.sweeps),
            "method": self.method,
            "box_lo": [int(v) for v in self.box.lo],
            "box_shape": [int(v) for v in self.box.shape],
            "anchor_scale": float(self.anchor_scale),
        }


def _window(cone: ConeSpec, atoms, R: float):
    rho = float(np.sqrt((atoms**2).sum(axis=1)).max())
    outer = R + rho
    hi = int(math.floor(outer))
    lo = np.full(cone.dimension, -hi, dtype=np.int64)
    for c in _positive_coords(cone):
        lo[c] = -int(math.ceil(rho))
    box = Box(lo, tuple(int(hi - v + 1) for v in lo))
    return box, rho


def _residual(v, interior_idx, off, probs):
    pv = np.zeros(len(interior_idx))
    for o, p in zip(off, probs):
        pv += p * v[interior_idx + o]
    return float(np.abs(pv - v[interior_idx]).max()) if len(pv) else 0.0


def build_v_exact(cone: ConeSpec, dist: StepDistribution, window_radius: float, tol: float = 1e-10, *,
                  method: str = "jacobi", init: str = "anchor", damping: float = 1.0,
                  max_sweeps: int = 10**6, anchor_scale: float = 1.0) -> HarmonicTable:
    """Solve V = E[V(. + X); . + X in K] on |x| <= R with V = c u on the far-field annulus.

    ``method`` is "jacobi" (damped Jacobi sweeps, stopped when the max
    update falls below tol times max |V|) or "direct" (sparse solve).
    ``init`` chooses the Jacobi starting point: "anchor" (u) or "zero".
    """
    if cone.dimension != dist.dimension:
        raise InvalidInputError("cone and step dimensions differ")
    if not dist.is_lattice:
        raise UnsupportedError("the harmonic table needs a lattice step distribution")
    atoms, probs = integer_support(dist)
    R = float(window_radius)
    if R < 10:
        raise InvalidInputError("window radius must be at least 10 lattice units")
    if not 0 < damping <= 1.0:
        raise InvalidInputError("damping must lie in (0, 1]")
    if init not in ("anchor", "zero"):
        raise InvalidInputError("init must be 'anchor' or 'zero'")
    box, rho = _window(cone, atoms, R)
    pts = box.points().astype(float)
    inside = np.asarray(contains(cone, pts)).reshape(-1)
    r = np.sqrt((pts**2).sum(axis=1))
    interior = inside & (r <= R)
    annulus = inside & (r > R) & (r <= R + rho)
    u = np.asarray(u_value(cone, pts)).reshape(-1) * anchor_scale
    v = np.zeros(box.size)
    v[annulus] = u[annulus]
    if init == "anchor":
        v[interior] = u[interior]
    off = (atoms * box.strides).sum(axis=1).astype(np.int64)
    idx = np.nonzero(interior)[0].astype(np.int64)
    if method == "jacobi":
        sweeps, _ = K.jacobi_sweeps(v, idx, off, probs, int(max_sweeps), float(tol), float(damping))
    elif method == "direct":
        pos = -np.ones(box.size, dtype=np.int64)
        pos[idx] = np.arange(len(idx))
        rows, cols, vals = [], [], []
        rhs = np.zeros(len(idx))
        for o, p in zip(off, probs):
            nb = idx + o
            j = pos[nb]
            unk = j >= 0
            rows.append(np.nonzero(unk)[0])
            cols.append(j[unk])
            vals.append(np.full(unk.sum(), -p))
            rhs += p * np.where(unk, 0.0, v[nb])
        m = len(idx)
        A = sparse.csc_matrix(
            (np.concatenate(vals + [np.ones(m)]),
             (np.concatenate(rows + [np.arange(m)]), np.concatenate(cols + [np.arange(m)]))),
            shape=(m, m),
        )
        v[idx] = spsolve(A, rhs)
        sweeps = 0
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    res = _residual(v, idx, off, probs)
    scale = float(np.abs(v[idx]).max()) if len(idx) else 1.0
    rel = res / scale if scale > 0 else res
    if not rel <= tol:
        raise ConvergenceError(
            f"fixed point not reached after {sweeps} sweeps: relative residual {rel:.3g} > {tol:g}", residual=rel
        )
    return HarmonicTable(
        cone=cone, dist=dist, window_radius=R, box=box, values=v.reshape(box.shape),
        interior=interior.reshape(box.shape), residual=res, relative_residual=rel, tol=tol,
        sweeps=int(sweeps), method=method, anchor_scale=anchor_scale,
    )


def v_ratio(table: HarmonicTable, frm, to) -> float:
    """V(to) / V(from); zero when ``to`` is outside the cone."""
    frm = np.asarray(frm, dtype=float).reshape(-1)
    to = np.asarray(to, dtype=float).reshape(-1)
    if not contains(table.cone, frm):
        raise InvalidInputError(f"{frm.tolist()} is not inside the cone, V vanishes there")
    v0 = table.value(frm)
    if v0 <= 0:
        raise InvalidInputError(f"V vanishes at {frm.tolist()}")
    if not contains(table.cone, to):
        return 0.0
    return table.value(to) / v0


def estimate_v_mc(cone: ConeSpec, dist: StepDistribution, x, n: int, replicas: int, seed: int,
                  batch: int = 1 << 17):
    """Monte Carlo E[u(x + S(n)); tau_x > n] with its standard error."""
    x = check_start(cone, x)
    n = int(n)
    if n == 0:
        return float(u_value(cone, x)), 0.0
    if replicas < 2:
        raise InvalidInputError("need at least two replicas")
    runner = _Runner(cone, dist, seed)
    s1 = s2 = 0.0
    for t0 in range(0, replicas, batch):
        B = min(batch, replicas - t0)
        tid = np.arange(t0, t0 + B, dtype=np.uint64)
        _, _, _, final, ex = runner.run(np.broadcast_to(x, (B, len(x))), 0, n, tid)
        val = np.where(ex == 0, np.asarray(u_value(cone, final)).reshape(-1), 0.0)
        s1 += float(val.sum())
        s2 += float((val * val).sum())
    mean = s1 / replicas
    var = max(s2 / replicas - mean * mean, 0.0) * replicas / (replicas - 1)
    return mean, math.sqrt(var / replicas)
