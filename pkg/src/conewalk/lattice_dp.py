"""Exact dynamic programs for integer lattice walks killed at leaving a cone.

Occupation measures live on a box of lattice points that covers every state
a path can visit; cells outside the cone are zeroed after each step, which is
exactly the killing at tau_x.  Three exact routes compute survival:

* product cones with product steps factorize into one-dimensional programs;
* Weyl chambers with sign steps use the Karlin-McGregor determinant summed
  over end points through de Bruijn's Pfaffian, in exact integer arithmetic;
* anything else runs the generic program, guarded by a memory budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels as K
from .cones import (
    HALF_LINE, HALF_SPACE, LINE, ORTHANT, WEYL_A, WEYL_B, ConeSpec, contains, reflection_sign_pairs,
)
from .ensemble import Ensemble, record_times
from .errors import InvalidInputError, ReachabilityError, UnsupportedError, WindowError
from .increments import StepDistribution, coordinate_cells, coordinate_spans, integer_support

WINDOW_BUDGET = 10**8


@dataclass
class Box:
    """Axis-aligned grid of integer points lo + spacing * i with 0 <= i < shape."""

    lo: np.ndarray
    shape: tuple
    spacing: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.int64)
        sp = np.ones(len(self.shape), dtype=np.int64) if self.spacing is None else self.spacing
        self.spacing = np.asarray(sp, dtype=np.int64)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def strides(self) -> np.ndarray:
        st = np.ones(len(self.shape), dtype=np.int64)
        for c in range(len(self.shape) - 2, -1, -1):
            st[c] = st[c + 1] * self.shape[c + 1]
        return st

    def points(self) -> np.ndarray:
        axes = [self.lo[c] + self.spacing[c] * np.arange(self.shape[c]) for c in range(len(self.shape))]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def index(self, z) -> tuple:
        z = np.asarray(z, dtype=np.int64) - self.lo
        return tuple(int(v) for v in z // self.spacing)

    def holds(self, z) -> bool:
        z = np.asarray(z, dtype=np.int64) - self.lo
        return bool(np.all(z >= 0) and np.all(z % self.spacing == 0)
                    and np.all(z // self.spacing < np.asarray(self.shape)))

    def mask(self, cone: ConeSpec) -> np.ndarray:
        return np.asarray(contains(cone, self.points().astype(float))).reshape(self.shape)


def _spacing(atoms: np.ndarray) -> np.ndarray:
    sp = np.gcd.reduce(np.abs(atoms), axis=0).astype(np.int64)
    return np.where(sp > 0, sp, 1)


def reach_box(cone: ConeSpec, atoms: np.ndarray, x, n: int, y=None) -> Box:
    """Grid containing every state of a surviving path from x (ending at y if given).

    Coordinates move in multiples of the per-coordinate gcd of the atoms,
    so the grid keeps only points congruent to x.  With an end point, a
    state at time k must be reachable from x in k steps and reach y in
    n - k steps.
    """
    amin, amax = atoms.min(axis=0), atoms.max(axis=0)
    if y is None:
        lo = x + n * np.minimum(amin, 0)
        hi = x + n * np.maximum(amax, 0)
    else:
        k = np.arange(n + 1)[:, None]
        lo_k = np.maximum(x + k * amin, y - (n - k) * amax)
        hi_k = np.minimum(x + k * amax, y - (n - k) * amin)
        ok = np.all(lo_k <= hi_k, axis=1)
        if not np.any(ok):
            return Box(x, tuple([0] * len(x)))
        lo, hi = lo_k[ok].min(axis=0), hi_k[ok].max(axis=0)
    for c in _positive_coords(cone):
        lo[c] = max(lo[c], 1)
    sp = _spacing(atoms)
    lo = x - sp * ((x - lo) // sp)
    hi = x + sp * ((hi - x) // sp)
    if np.any(hi < lo):
        return Box(lo, tuple([0] * len(lo)), sp)
    return Box(lo.astype(np.int64), tuple(int(v) for v in (hi - lo) // sp + 1), sp)


def _positive_coords(cone: ConeSpec):
    if cone.kind in (HALF_LINE, ORTHANT, WEYL_B):
        return list(range(cone.dimension))
    if cone.kind == HALF_SPACE:
        return [cone.dimension - 1]
    return []


def _as_int_point(cone, x, what="point"):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != cone.dimension:
        raise InvalidInputError(f"{what} has dimension {x.shape[0]}, cone has {cone.dimension}")
    if np.any(np.abs(x - np.round(x)) > 1e-12):
        raise InvalidInputError(f"{what} {x.tolist()} is not a lattice point")
    return np.round(x).astype(np.int64)


def _slices(w, shape):
    """(src, dst) slices moving mass from z to z + w inside a box."""
    src, dst = [], []
    for c, s in enumerate(shape):
        k = int(w[c])
        if k >= 0:
            src.append(slice(0, max(s - k, 0)))
            dst.append(slice(min(k, s), s))
        else:
            src.append(slice(min(-k, s), s))
            dst.append(slice(0, max(s + k, 0)))
    return tuple(src), tuple(dst)


def _check_budget(nat, box: Box, factor: int = 1):
    if nat * box.size * factor > WINDOW_BUDGET:
        raise WindowError(
            f"lattice window of {box.size} cells x {nat} atoms exceeds the budget {WINDOW_BUDGET:.0e}; "
            "reduce n or use Monte Carlo"
        )


class Program:
    """Push and pull steps of the killed walk on a fixed box."""

    def __init__(self, cone: ConeSpec, dist: StepDistribution, box: Box, factor: int = 1):
        self.cone = cone
        self.atoms, self.probs = integer_support(dist)
        self.box = box
        _check_budget(len(self.atoms), box, factor)
        self.mask = box.mask(cone) if box.size else np.zeros(box.shape, dtype=bool)
        steps = self.atoms // box.spacing
        self.push_sl = [_slices(w, box.shape) for w in steps]
        self.pull_sl = [_slices(-w, box.shape) for w in steps]

    def push(self, p: np.ndarray) -> np.ndarray:
        """One forward step of the killed walk: mass at z moves to z + w if z + w is in K."""
        new = np.zeros_like(p)
        for pw, (src, dst) in zip(self.probs, self.push_sl):
            new[dst] += pw * p[src]
        new *= self.mask
        return new

    def pull(self, q: np.ndarray) -> np.ndarray:
        """q'(z) = 1_K(z) sum_w p(w) q(z + w)."""
        new = np.zeros_like(q)
        for pw, (src, dst) in zip(self.probs, self.pull_sl):
            # value at z comes from z + w: dst is z, src is z + w
            new[dst] += pw * q[src]
        new *= self.mask
        return new


def forward(cone: ConeSpec, dist: StepDistribution, x, n: int, horizons=None):
    """Run the killed walk from x for n steps.

    Returns (survival at each horizon, final occupation array, box).
    """
    xi = _as_int_point(cone, x, "start")
    if not contains(cone, xi.astype(float)):
        raise InvalidInputError(f"start {xi.tolist()} is not inside the open cone")
    atoms, _ = integer_support(dist)
    box = reach_box(cone, atoms, xi, n)
    prog = Program(cone, dist, box)
    p = np.zeros(box.shape)
    p[box.index(xi)] = 1.0
    hs = sorted(set(int(h) for h in (horizons or [n])))
    out = {}
    if 0 in hs:
        out[0] = 1.0
    for k in range(1, n + 1):
        p = prog.push(p)
        if k in hs:
            out[k] = float(p.sum())
    return np.array([out[h] for h in hs]), p, box


def endpoint_law(cone: ConeSpec, dist: StepDistribution, x, n: int, conditioned: bool = True) -> dict:
    """Law of x + S(n) on {tau_x > n} as {point: probability} (normalized if conditioned)."""
    _, p, box = forward(cone, dist, x, n)
    pts = box.points()
    flat = p.ravel()
    nz = np.nonzero(flat > 0)[0]
    tot = flat.sum() if conditioned else 1.0
    return {tuple(int(v) for v in pts[i]): flat[i] / tot for i in nz}


def point_probability(cone: ConeSpec, dist: StepDistribution, x, y, m: int) -> float:
    """P(x + S(m) = y, tau_x > m) by the forward program."""
    _, p, box = forward(cone, dist, x, m)
    yi = _as_int_point(cone, y, "end")
    return float(p[box.index(yi)]) if box.holds(yi) else 0.0


def reversed_steps(dist: StepDistribution) -> StepDistribution:
    """The law of -X."""
    from .increments import lattice

    atoms, probs = dist.support()
    return lattice(-atoms, probs, name=f"-{dist.name}")


# ---------------------------------------------------------------- survival


def _is_sign_product(dist: StepDistribution) -> bool:
    if dist.kind == "rademacher":
        return True
    if dist.kind != "lattice":
        return False
    f = dist.marginal() if (dist.factor is not None or dist.dimension == 1) else None
    if f is None:
        return False
    a, p = f.support()
    return a.shape[0] == 2 and set(a[:, 0].tolist()) == {-1.0, 1.0} and np.allclose(p, 0.5, atol=0)


def karlin_mcgregor_applies(cone: ConeSpec, dist: StepDistribution, x) -> bool:
    """Sign steps in a Weyl chamber with all coordinates of equal parity: paths cannot
    cross a reflecting hyperplane without landing on it."""
    if cone.kind not in (WEYL_A, WEYL_B) or not _is_sign_product(dist):
        return False
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x - np.round(x)) > 0):
        return False
    par = np.round(x).astype(np.int64) % 2
    return bool(np.all(par == par[0]))


def _pfaffian(a):
    """Pfaffian of a skew-symmetric matrix of exact numbers by row expansion."""
    m = len(a)
    if m == 0:
        return 1
    if m % 2:
        return 0
    total = 0
    rest = list(range(1, m))
    for idx, j in enumerate(rest):
        if a[0][j] == 0:
            continue
        keep = [r for r in rest if r != j]
        sub = [[a[r][s] for s in keep] for r in keep]
        sign = 1 if idx % 2 == 0 else -1
        total += sign * a[0][j] * _pfaffian(sub)
    return total


def _path_counts(n: int):
    """c[k] = number of n-step sign paths with displacement k - n, for k = 0..2n."""
    c = [0] * (2 * n + 1)
    val = 1
    for j in range(n + 1):
        c[2 * j] = val
        val = val * (n - j) // (j + 1)
    return c


def karlin_mcgregor_count(cone: ConeSpec, x, n: int):
    """Number of surviving n-step paths of d independent sign walks, as an exact integer.

    P(tau_x > n) is this count divided by 2^(n d).
    """
    x = [int(round(v)) for v in x]
    d = len(x)
    c = _path_counts(n)

    def free(a, y):
        k = y - a + n
        return c[k] if 0 <= k <= 2 * n else 0

    lo = min(x) - n
    hi = max(x) + n
    if cone.kind == WEYL_B:
        ys = range(1, hi + 1)
        phi = [[free(a, y) - free(a, -y) for y in ys] for a in x]
    else:
        ys = range(lo, hi + 1)
        phi = [[free(a, y) for y in ys] for a in x]
    # de Bruijn: sum over y_1 < ... < y_d of det[phi_i(y_j)] is a Pfaffian
    size = d + (d % 2)
    mat = [[0] * size for _ in range(size)]
    prefix = []
    for i in range(d):
        acc, pre = 0, []
        for v in phi[i]:
            pre.append(acc)
            acc += v
        prefix.append((pre, acc))
    for i in range(d):
        for j in range(i + 1, d):
            pi, pj = prefix[i][0], prefix[j][0]
            s = 0
            for t in range(len(phi[i])):
                # sum_{a<b} phi_i(a) phi_j(b) - phi_j(a) phi_i(b)
                s += pi[t] * phi[j][t] - pj[t] * phi[i][t]
            mat[i][j], mat[j][i] = s, -s
        if d % 2:
            tot = prefix[i][1]
            mat[i][d], mat[d][i] = tot, -tot
    return _pfaffian(mat)


def exact_survival(cone: ConeSpec, dist: StepDistribution, x, horizons, return_method: bool = False):
    """Exact P(tau_x > n) for every n in ``horizons``."""
    if cone.dimension != dist.dimension:
        raise InvalidInputError("cone and step dimensions differ")
    if not dist.is_lattice:
        raise UnsupportedError("exact survival needs a lattice step distribution")
    integer_support(dist)
    xi = _as_int_point(cone, x, "start")
    if not contains(cone, xi.astype(float)):
        raise InvalidInputError(f"start {xi.tolist()} is not inside the open cone")
    hs = [int(h) for h in horizons]
    if any(h < 0 for h in hs):
        raise InvalidInputError("horizons must be nonnegative")
    factors = reflection_sign_pairs(cone)
    if factors is not None and dist.is_product and cone.dimension > 1:
        marg = dist.marginal()
        out = np.ones(len(hs))
        for i, kind in enumerate(factors):
            if kind == LINE:
                continue
            out *= _generic(ConeSpec(HALF_LINE, 1), marg, xi[i : i + 1], hs)
        method = "product"
    elif karlin_mcgregor_applies(cone, dist, xi):
        d = cone.dimension
        out = np.array([
            float(Fraction(karlin_mcgregor_count(cone, xi, h), 2 ** (h * d))) if h > 0 else 1.0 for h in hs
        ])
        method = "karlin-mcgregor"
    else:
        out = _generic(cone, dist, xi, hs)
        method = "generic"
    return (out, method) if return_method else out


def _generic(cone, dist, xi, hs):
    top = max(hs) if hs else 0
    if top == 0:
        return np.ones(len(hs))
    vals, _, _ = forward(cone, dist, xi, top, horizons=[h for h in hs if h > 0] + [top])
    lookup = dict(zip(sorted(set([h for h in hs if h > 0] + [top])), vals))
    return np.array([1.0 if h == 0 else lookup[h] for h in hs])


# ---------------------------------------------------------------- enumeration


def enumerate_paths(cone: ConeSpec, dist: StepDistribution, x, n: int):
    """Brute force over all |support|^n step sequences.

    Yields (atom indices, probability, exit index or None).
    """
    atoms, probs = integer_support(dist)
    if len(atoms) ** n > 5 * 10**6:
        raise WindowError("too many paths to enumerate")
    x = _as_int_point(cone, x, "start")
    for seq in itertools.product(range(len(atoms)), repeat=n):
        z = x.astype(float).copy()
        pr = 1.0
        ex = None
        for k, a in enumerate(seq, 1):
            z = z + atoms[a]
            pr *= probs[a]
            if ex is None and not contains(cone, z):
                ex = k
        yield seq, pr, ex


def reachable(cone: ConeSpec, dist: StepDistribution, x, y, n: int) -> bool:
    """y in D_n(x): reachable in n steps with positive probability inside the cone."""
    try:
        return bridge_probability(cone, dist, x, y, n) > 0
    except ReachabilityError:
        return False


# ---------------------------------------------------------------- bridges


class BridgeTable:
    """Reverse program q_L(z) = P(z + S(L) = y, tau_z > L), checkpointed every ``block`` lengths."""

    def __init__(self, cone: ConeSpec, dist: StepDistribution, x, y, n: int, block: Optional[int] = None):
        self.cone, self.dist = cone, dist
        self.x = _as_int_point(cone, x, "start")
        self.y = _as_int_point(cone, y, "end")
        self.n = int(n)
        if self.n < 0:
            raise InvalidInputError("n must be nonnegative")
        if not contains(cone, self.x.astype(float)):
            raise InvalidInputError(f"start {self.x.tolist()} is not inside the open cone")
        if not contains(cone, self.y.astype(float)):
            raise ReachabilityError(f"end point {self.y.tolist()} is not inside the open cone")
        atoms, probs = integer_support(dist)
        self.box = reach_box(cone, atoms, self.x, self.n, self.y)
        if self.box.size == 0 or not self.box.holds(self.x) or not self.box.holds(self.y):
            raise ReachabilityError(f"{self.y.tolist()} cannot be reached from {self.x.tolist()} in {n} steps")
        self.block = max(1, int(block or math.ceil(math.sqrt(max(self.n, 1)))))
        ncheck = self.n // self.block + 1
        self.prog = Program(cone, dist, self.box, factor=1)
        if self.box.size * (ncheck + self.block) > WINDOW_BUDGET:
            raise WindowError("bridge table does not fit the memory budget")
        q = np.zeros(self.box.shape)
        q[self.box.index(self.y)] = 1.0
        self.checkpoints = [q]
        for L in range(1, self.n + 1):
            q = self.prog.pull(q)
            if L % self.block == 0:
                self.checkpoints.append(q)
        self.top = q
        self.probability = float(q[self.box.index(self.x)])
        if self.probability <= 0:
            raise ReachabilityError(
                f"{self.y.tolist()} is not in D_{n}(x) for x = {self.x.tolist()} (parity or cone constraint)"
            )

    def lengths(self, c: int) -> np.ndarray:
        """q_L for L = c*block .. c*block + block - 1 (clipped at n), stacked and flattened."""
        q = self.checkpoints[c]
        top = min((c + 1) * self.block, self.n + 1)
        out = np.empty((top - c * self.block, self.box.size))
        for r in range(out.shape[0]):
            if r:
                q = self.prog.pull(q)
            out[r] = q.ravel()
        return out

    def q(self, L: int) -> np.ndarray:
        c = L // self.block
        return self.lengths(c)[L - c * self.block].reshape(self.box.shape)


def bridge_probability(cone: ConeSpec, dist: StepDistribution, x, y, n: int) -> float:
    """P(x + S(n) = y, tau_x > n)."""
    return BridgeTable(cone, dist, x, y, n).probability


def sample_bridge_dp(cone: ConeSpec, dist: StepDistribution, x, y, n: int, count: int, seed: int,
                     record="quarters", table: Optional[BridgeTable] = None) -> Ensemble:
    """Exact sequential sampling of the bridge law from the reverse program."""
    tab = table or BridgeTable(cone, dist, x, y, n)
    n = tab.n
    rt = record_times(n, record)
    atoms, probs = integer_support(dist)
    d = cone.dimension
    zs = np.repeat(tab.x[None, :], count, axis=0).astype(np.int64)
    keys = np.empty(count, dtype=np.uint64)
    K.init_keys(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), 0, 0, keys)
    pos = np.zeros((count, len(rt), d))
    seg = np.full((count, max(len(rt) - 1, 1), 3), -np.inf)
    seg_state = np.full((count, 3), -np.inf)
    jrec = np.zeros(count, dtype=np.int64)
    if rt[0] == 0:
        pos[:, 0] = tab.x
        jrec[:] = 1
    lo = tab.box.lo.astype(np.int64)
    shape = np.asarray(tab.box.shape, dtype=np.int64)
    strides = tab.box.strides
    spacing = tab.box.spacing
    nblocks = len(tab.checkpoints)
    for c in range(nblocks - 1, -1, -1):
        base = c * tab.block
        if base > n - 1:
            continue
        m1 = n - base
        m0 = max(0, n - base - tab.block)
        qb = tab.lengths(c)
        K.advance_bridge(qb, base, m0, m1, n, lo, shape, strides, spacing, atoms, probs, zs, keys, rt, pos, seg,
                         seg_state, jrec)
    if not np.all(zs == tab.y):
        raise AssertionError("bridge sampler missed its end point")
    return Ensemble(
        law="bridge", horizon=n, scale=math.sqrt(n) if n else 1.0, times=rt, positions=pos, seg_max=seg,
        start=tab.x.astype(float), seed=seed, attempts=count, cone=cone, dist=dist,
        end=tab.y.astype(float), acceptance=tab.probability, cells=coordinate_cells(dist),
        spans=coordinate_spans(dist), metadata={"method": "dp", "bridge_probability": tab.probability},
    )


def bridge_prefix_identity(cone: ConeSpec, dist: StepDistribution, x, y, n: int, t: float):
    """Both sides of the finite-n prefix identity for k = floor(n t) steps.

    Left: law of the first k steps of the bridge from x to y, obtained by
    enumerating all n-step paths.  Right: law of the first k steps under
    {tau_x > k}, reweighted by
    h(z) = P(tau_x > k) P(z + S(n-k) = y, tau_z > n-k) / P(x + S(n) = y, tau_x > n)
    with every probability in h taken from the dynamic programs.
    Returns two dicts keyed by prefix step-index tuples.
    """
    k = int(math.floor(n * t))
    atoms, _ = integer_support(dist)
    yi = _as_int_point(cone, y, "end")
    xi = _as_int_point(cone, x, "start")
    # left side: full enumeration
    bridge, total = {}, 0.0
    for seq, pr, ex in enumerate_paths(cone, dist, xi, n):
        if ex is None and np.array_equal(xi + atoms[list(seq)].sum(axis=0), yi):
            bridge[seq[:k]] = bridge.get(seq[:k], 0.0) + pr
            total += pr
    if total <= 0:
        raise ReachabilityError(f"{yi.tolist()} is not in D_{n}(x)")
    bridge = {s: v / total for s, v in bridge.items()}
    # right side: meander prefix law times the discrete weight
    tab = BridgeTable(cone, dist, xi, yi, n)
    qk = tab.q(n - k)
    surv_k = float(exact_survival(cone, dist, xi, [k])[0])
    prefixes = [(seq, pr) for seq, pr, ex in enumerate_paths(cone, dist, xi, k) if ex is None]
    meander = {}
    for seq, pr in prefixes:
        z = xi + atoms[list(seq)].sum(axis=0) if seq else xi
        qz = float(qk[tab.box.index(z)]) if tab.box.holds(z) else 0.0
        h = surv_k * qz / tab.probability
        meander[seq] = (pr / surv_k) * h
    return bridge, meander
