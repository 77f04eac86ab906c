"""Samplers for the three conditioned laws: meander, Doob transform and bridge."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .cones import ConeSpec, dist_to_boundary
from .engine import ACCEPTANCE_FLOOR, BATCH, _Runner, check_start, rejection_ensemble, unbiased_rate
from .ensemble import Ensemble, record_times
from .errors import (
    AcceptanceUnderflowError, ExtinctionError, InvalidInputError, UnsupportedError, WindowError,
)
from .harmonic import HarmonicTable
from .increments import StepDistribution, coordinate_cells, coordinate_spans, integer_support
from .lattice_dp import BridgeTable, sample_bridge_dp

BRIDGE_REJECTION_MIN = 1e-2


def sample_meander(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, seed: int, *,
                   record="quarters", floor: float = ACCEPTANCE_FLOOR, max_trials=None,
                   kplus_budget: int = 0) -> Ensemble:
    """``count`` paths from the law of the walk conditioned on tau_x > n, by exact rejection.

    ``acceptance`` is the inverse-binomial unbiased estimate of P(tau_x > n).
    With ``kplus_budget`` > 0 the heuristic K_+ probe result is attached to the
    metadata; it never blocks the run.
    """
    ens = rejection_ensemble(cone, dist, x, n, count, seed, record=record, floor=floor, max_trials=max_trials)
    if kplus_budget:
        ens.metadata["kplus"] = check_kplus(cone, dist, x, kplus_budget, seed=seed).to_dict()
    return ens


def sample_meander_split(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, levels, seed: int, *,
                         record="quarters", floor: float = ACCEPTANCE_FLOOR, max_attempts: Optional[int] = None,
                         batch: int = BATCH) -> Ensemble:
    """Multilevel splitting towards {tau_x > n}.

    Level 0 is rejection up to levels[0].  At level l, parents are drawn
    uniformly from the survivors of level l-1 and continued to levels[l] with
    fresh streams until ``count`` children survive.  The output is an
    approximation of the conditioned law (flagged in the metadata); the
    product of level success rates estimates P(tau_x > n).
    """
    x = check_start(cone, x)
    lv = sorted(set(int(v) for v in levels))
    if not lv or lv[0] <= 0 or lv[-1] != int(n):
        raise InvalidInputError("levels must be positive, increasing and end at n")
    n = int(n)
    if lv == [n]:
        ens = rejection_ensemble(cone, dist, x, n, count, seed, record=record, floor=floor, max_trials=max_attempts)
        ens.metadata.update({"levels": lv, "approximate": False, "ess": float(count)})
        return ens
    rt = record_times(n, record)
    d = cone.dimension
    runner = _Runner(cone, dist, seed)
    cap = max_attempts if max_attempts is not None else int(max(count / floor, 1e6))
    # level 0
    try:
        ids, att0 = _scan_from(runner, np.broadcast_to(x, (1, d)), None, 0, lv[0], count, lambda j: j, cap, batch)
    except _Extinct as exc:
        raise ExtinctionError(f"no path survived to the first level {lv[0]} within {exc.args[0]} trials") from None
    state = np.zeros((count, 3))
    state[:] = -np.inf
    pos, seg, seg_state, final, ex = runner.run(np.broadcast_to(x, (count, d)), 0, lv[0], ids, rec_times=rt,
                                                seg_state=state)
    assert not np.any(ex)
    roots = np.arange(count)
    attempts, rates = [att0], [unbiased_rate(count, att0)]
    for li in range(1, len(lv)):
        k0, k1 = lv[li - 1], lv[li]
        base = np.uint64(li) << np.uint64(40)
        try:
            ids, att = _scan_from(runner, final, (seed, li), k0, k1, count, lambda j: base | np.uint64(j), cap, batch)
        except _Extinct as exc:
            raise ExtinctionError(
                f"level {k0} -> {k1}: no path survived within {exc.args[0]} attempts; use finer levels"
            ) from None
        parents = _parents(seed, li, ids, count)
        streams = np.array([base | np.uint64(j) for j in ids], dtype=np.uint64)
        st = seg_state[parents].copy()
        p2, s2, st2, f2, e2 = runner.run(final[parents], k0, k1, streams, rec_times=rt, seg_state=st)
        assert not np.any(e2)
        done = rt <= k0
        p2[:, done] = pos[parents][:, done]
        closed = np.nonzero(rt[1:] <= k0)[0]
        s2[:, closed] = seg[parents][:, closed]
        pos, seg, seg_state, final = p2, s2, st2, f2
        roots = roots[parents]
        attempts.append(att)
        rates.append(unbiased_rate(count, att))
    _, fam = np.unique(roots, return_counts=True)
    ess = float(count**2 / (fam.astype(float) ** 2).sum())
    meta = {
        "method": "splitting",
        "approximate": True,
        "levels": lv,
        "level_attempts": [int(a) for a in attempts],
        "level_rates": [float(r) for r in rates],
        "ess": ess,
        "distinct_roots": int(len(fam)),
    }
    return Ensemble(
        law="meander", horizon=n, scale=math.sqrt(n), times=rt, positions=pos, seg_max=seg, start=x, seed=seed,
        attempts=int(sum(attempts)), cone=cone, dist=dist, acceptance=float(np.prod(rates)),
        cells=coordinate_cells(dist), spans=coordinate_spans(dist), metadata=meta,
    )


class _Extinct(Exception):
    pass


def _parents(seed, level, js, npar):
    js = np.asarray(js, dtype=np.int64)
    out = np.empty(len(js), dtype=np.int64)
    for i, j in enumerate(js):
        tmp = np.empty(1, dtype=np.int64)
        K.draw_parents(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), level, int(j), 1, npar, tmp)
        out[i] = tmp[0]
    return out


def _scan_from(runner, finals, split, k0, k1, count, stream_of, cap, batch):
    """First ``count`` surviving attempts from k0 to k1; parents drawn when ``split`` is set."""
    d = finals.shape[1]
    ids, t0 = [], 0
    while len(ids) < count:
        if t0 >= cap:
            if not ids:
                raise _Extinct(t0)
            raise ExtinctionError(f"only {len(ids)} of {count} particles survived within {cap} attempts")
        B = min(batch, cap - t0)
        js = np.arange(t0, t0 + B, dtype=np.int64)
        if split is None:
            starts = np.broadcast_to(finals[0], (B, d))
            streams = js.astype(np.uint64)
        else:
            seed, li = split
            par = np.empty(B, dtype=np.int64)
            K.draw_parents(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), li, t0, B, finals.shape[0], par)
            starts = finals[par]
            streams = (np.uint64(li) << np.uint64(40)) | js.astype(np.uint64)
        _, _, _, _, ex = runner.run(starts, k0, k1, streams)
        hit = np.nonzero(ex == 0)[0][: count - len(ids)]
        ids.extend((hit + t0).tolist())
        t0 += B
    return np.asarray(ids, dtype=np.int64), int(ids[-1]) + 1


def sample_htransform(cone: ConeSpec, dist: StepDistribution, vtable: HarmonicTable, x, n: int, count: int,
                      seed: int, *, record="quarters") -> Ensemble:
    """Exact paths of the Doob transform with kernel p(w) V(z + w) / V(z)."""
    if vtable.cone != cone or vtable.dist.name != dist.name:
        raise InvalidInputError("the harmonic table was built for a different cone or step law")
    x = check_start(cone, x)
    atoms, probs = integer_support(dist)
    xi = np.round(x).astype(np.int64)
    if np.any(np.abs(x - xi) > 0):
        raise InvalidInputError("the start must be a lattice point")
    if float((x**2).sum()) > vtable.window_radius**2:
        raise WindowError("start lies outside the table window")
    if vtable.value(x) <= 0:
        raise InvalidInputError(f"V vanishes at {x.tolist()}")
    n = int(n)
    rt = record_times(n, record)
    box = vtable.box
    off = (atoms * box.strides).sum(axis=1).astype(np.int64)
    pos = np.zeros((count, len(rt), cone.dimension))
    seg = np.full((count, max(len(rt) - 1, 1), 3), -np.inf)
    final = np.empty((count, cone.dimension))
    status = np.empty(count, dtype=np.int64)
    K.run_hwalk(
        np.ascontiguousarray(vtable.values.ravel()), box.lo.astype(np.int64), box.strides,
        np.asarray(box.shape, dtype=np.int64), float(vtable.window_radius) ** 2, off, atoms, probs,
        np.repeat(xi[None, :], count, axis=0), n, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
        np.arange(count, dtype=np.uint64), rt, True, pos, seg, final, status,
    )
    if np.any(status):
        bad = int(np.nonzero(status)[0][0])
        raise WindowError(
            f"path {bad} left the table window at step {int(status[bad])}; rebuild V with a larger radius"
        )
    return Ensemble(
        law="htransform", horizon=n, scale=math.sqrt(n) if n else 1.0, times=rt, positions=pos, seg_max=seg,
        start=x, seed=seed, attempts=count, cone=cone, dist=dist, acceptance=1.0,
        cells=coordinate_cells(dist), spans=coordinate_spans(dist),
        metadata={"method": "doob-transform", "table_residual": float(vtable.relative_residual)},
    )


def sample_bridge(cone: ConeSpec, dist: StepDistribution, x, n: int, y, count: int, seed: int, *,
                  method: str = "auto", record="quarters", floor: float = ACCEPTANCE_FLOOR) -> Ensemble:
    """Paths from the law of the walk conditioned on tau_x > n and x + S(n) = y.

    ``method`` "rejection" accepts free paths meeting both conditions;
    "dp" samples steps sequentially from the exact reverse program; "auto"
    uses rejection when the exact acceptance is at least 1e-2.
    """
    if not dist.is_lattice:
        raise UnsupportedError("bridges need lattice steps")
    x = check_start(cone, x)
    y = np.asarray(y, dtype=float).reshape(-1)
    if method not in ("auto", "dp", "rejection"):
        raise InvalidInputError(f"unknown bridge method {method!r}")
    table = None
    try:
        table = BridgeTable(cone, dist, x, y, n)
    except WindowError:
        if method == "dp":
            raise
    if method == "auto":
        method = "rejection" if table is None or table.probability >= BRIDGE_REJECTION_MIN else "dp"
    if method == "dp":
        return sample_bridge_dp(cone, dist, x, y, n, count, seed, record=record, table=table)
    try:
        ens = rejection_ensemble(cone, dist, x, n, count, seed, end=y, record=record, law="bridge", floor=floor,
                                 factorize=False)
    except AcceptanceUnderflowError as exc:
        raise AcceptanceUnderflowError(f"{exc}; the dp bridge sampler avoids rejection") from None
    if table is not None:
        ens.metadata["bridge_probability"] = table.probability
    return ens


@dataclass
class KPlusResult:
    """Outcome of the operational K_+ probe.  Always heuristic."""

    passed: bool
    inconclusive: bool
    steps_used: int
    probes: int
    witness: Optional[list] = None
    heuristic: bool = True
    params: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "heuristic": self.heuristic,
            "steps_used": self.steps_used,
            "probes": self.probes,
            "witness": self.witness,
            **self.params,
        }


def check_kplus(cone: ConeSpec, dist: StepDistribution, x, probe_budget: int, *, seed: int = 0,
                gamma0: float = 0.1, radius: float = 10.0) -> KPlusResult:
    """True iff within ``probe_budget`` simulated steps some surviving path reaches a point z
    with |z| >= radius and distance to the boundary >= gamma0 |z|."""
    x = check_start(cone, x)
    params = {"gamma0": gamma0, "radius": radius}
    budget = int(probe_budget)
    if budget <= 0:
        return KPlusResult(False, True, 0, 0, params=params)
    runner = _Runner(cone, dist, seed)
    horizon = int(max(16, 4 * radius * radius))
    used = probes = 0
    rt = None
    while used < budget:
        h = min(horizon, budget - used)
        rt = np.arange(h + 1, dtype=np.int64)
        pos, _, _, _, ex = runner.run(x[None, :], 0, h, np.array([probes], dtype=np.uint64), rec_times=rt)
        last = int(ex[0]) - 1 if ex[0] else h
        path = pos[0, 1 : last + 1]
        probes += 1
        if len(path):
            r = np.sqrt((path**2).sum(axis=1))
            dist_b = np.asarray(dist_to_boundary(cone, path)).reshape(-1)
            good = np.nonzero((r >= radius) & (dist_b >= gamma0 * r))[0]
            if len(good):
                used += int(good[0]) + 1
                return KPlusResult(True, False, used, probes, path[good[0]].tolist(), params=params)
        used += max(last, 1)
    return KPlusResult(False, True, used, probes, params=params)
