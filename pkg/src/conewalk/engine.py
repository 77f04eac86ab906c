"""Walk simulation, exit times, survival probabilities and maximal inequalities."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from scipy import stats

from . import _kernels as K
from .cones import ConeSpec, HALF_LINE, LINE, ConeSpec as _Cone, contains, reflection_sign_pairs
from .ensemble import Ensemble, record_times
from .errors import AcceptanceUnderflowError, InvalidInputError
from .increments import StepDistribution, coordinate_cells, coordinate_spans

ACCEPTANCE_FLOOR = 1e-6
BATCH = 1 << 17


def set_threads(k: Optional[int]) -> int:
    """Set the number of compiled worker threads (clamped to what numba allows)."""
    import numba

    if k is None:
        env = os.environ.get("CONEWALK_THREADS")
        if not env:
            return numba.get_num_threads()
        k = int(env)
    k = max(1, min(int(k), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(k)
    return k


@dataclass
class PathSample:
    """x, the positions x+S(1..), and the first exit index (None if the path survived)."""

    start: np.ndarray
    positions: np.ndarray
    exit_index: Optional[int]

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass
class SurvivalEstimate:
    n: int
    x: np.ndarray
    probability: float
    std_error: float
    replicas: int
    method: str

    def to_dict(self):
        return {
            "n": int(self.n),
            "x": [float(v) for v in self.x],
            "probability": float(self.probability),
            "std_error": float(self.std_error),
            "replicas": int(self.replicas),
            "method": self.method,
        }


def check_start(cone: ConeSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != cone.dimension:
        raise InvalidInputError(f"start has dimension {x.shape[0]}, cone has {cone.dimension}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("start must be finite")
    if not contains(cone, x):
        raise InvalidInputError(f"start {x.tolist()} is not inside the open cone {cone}")
    return x


def _check_dims(cone: ConeSpec, dist: StepDistribution):
    if cone.dimension != dist.dimension:
        raise InvalidInputError(f"cone dimension {cone.dimension} != step dimension {dist.dimension}")


def _labels(d):
    return np.arange(d, dtype=np.int64)


def _alpha(cone):
    return float(cone.alpha) if cone.alpha is not None else 0.0


class _Runner:
    """Thin wrapper that feeds the compiled batch kernel."""

    def __init__(self, cone: ConeSpec, dist: StepDistribution, seed: int, labels=None):
        self.cone, self.dist = cone, dist
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.atoms, self.cdf = dist.kernel_arrays()
        self.labels = _labels(dist.dimension) if labels is None else np.asarray(labels, dtype=np.int64)
        self.ncols = dist.dimension if dist.is_product and dist.dimension > 1 else 1

    def run(self, starts, k0, k1, streams, rec_times=None, full=False, seg_state=None, shift=None):
        starts = np.ascontiguousarray(starts, dtype=np.float64)
        B, d = starts.shape
        streams = np.ascontiguousarray(streams, dtype=np.uint64)
        if streams.ndim == 1:
            streams = np.repeat(streams[:, None], self.ncols, axis=1)
        record = rec_times is not None
        rt = np.asarray(rec_times if record else [], dtype=np.int64)
        R = max(len(rt), 1)
        pos = np.zeros((B if record else 1, R, d))
        seg = np.full((B if record else 1, max(R - 1, 1), 3), -np.inf)
        if seg_state is None:
            seg_state = np.full((B, 3), -np.inf)
        final = np.empty((B, d))
        ex = np.empty(B, dtype=np.int64)
        K.run_batch(
            self.cone.code, _alpha(self.cone), self.dist.step_code, self.atoms, self.cdf, starts,
            int(k0), int(k1), self.seed, streams, self.labels, rt, record, bool(full),
            pos, seg, seg_state, final, ex, 64 * numba.get_num_threads(),
            np.zeros(d) if shift is None else np.asarray(shift, dtype=np.float64),
        )
        return pos, seg, seg_state, final, ex


def _scan(runner: _Runner, x, n, count, end=None, floor=ACCEPTANCE_FLOOR, max_trials=None,
          batch=BATCH, stream_base=0):
    """Find the first ``count`` accepted trial ids, in index order.

    Returns (ids, attempts) with attempts = last accepted id + 1.
    """
    d = len(x)
    ids = []
    need = count
    t0 = 0
    limit = max_trials if max_trials is not None else np.iinfo(np.int64).max
    while need > 0:
        if t0 >= limit:
            got = count - need
            rate = got / t0 if t0 else 0.0
            raise AcceptanceUnderflowError(
                f"acceptance rate {rate:.3g} after {t0} trials is below the floor {floor:g}; "
                "reduce n, move the start away from the boundary, or use splitting"
            )
        B = min(batch, limit - t0)
        if runner.cone.kind == HALF_LINE and runner.dist.step_code != 2:
            ex = np.empty(B, dtype=np.int64)
            final = np.empty(B)
            K.scan_halfline(runner.dist.step_code, runner.atoms, runner.cdf, float(x[0]), int(n), runner.seed,
                            t0 + stream_base, runner.labels[0], ex, final, 64 * numba.get_num_threads())
            final = final[:, None]
        else:
            tid = np.arange(t0, t0 + B, dtype=np.uint64) + np.uint64(stream_base)
            starts = np.broadcast_to(x, (B, d))
            _, _, _, final, ex = runner.run(starts, 0, n, tid)
        ok = ex == 0
        if end is not None:
            ok &= np.all(final == end, axis=1)
        hit = np.nonzero(ok)[0]
        if len(hit) >= need:
            hit = hit[:need]
        ids.extend((hit + t0).tolist())
        need -= len(hit)
        t0 += B
        if need > 0 and t0 >= 10.0 / floor and (count - need) < floor * t0:
            raise AcceptanceUnderflowError(
                f"acceptance rate {(count - need) / t0:.3g} is below the floor {floor:g}; "
                "reduce n, move the start away from the boundary, or use splitting"
            )
    attempts = ids[-1] + 1 if ids else 0
    return np.asarray(ids, dtype=np.int64), attempts


def unbiased_rate(count, attempts):
    """Inverse-binomial estimate (count-1)/(attempts-1) of the success probability."""
    if attempts <= 0:
        return 0.0
    if count <= 1 or attempts <= 1:
        return count / attempts
    return (count - 1) / (attempts - 1)


def rejection_ensemble(cone: ConeSpec, dist: StepDistribution, x, n: int, count: int, seed: int, *,
                       end=None, record="quarters", law="meander", floor=ACCEPTANCE_FLOOR,
                       max_trials=None, factorize=True, batch=BATCH, shift=None) -> Ensemble:
    """Exact rejection sampling of paths with tau_x > n (and x + S(n) = end if given).

    Product-shaped cones with product increments are sampled coordinate by
    coordinate; the law is identical since the conditioning event factorizes.
    With ``shift`` the paths are kept in the translated cone K + shift.
    """
    _check_dims(cone, dist)
    sh = np.zeros(cone.dimension) if shift is None else np.asarray(shift, dtype=float).reshape(-1)
    if shift is not None and end is not None:
        raise InvalidInputError("bridges cannot be combined with a shifted cone")
    x = check_start(cone, np.asarray(x, dtype=float).reshape(-1) - sh) + sh
    n = int(n)
    if count < 1:
        raise InvalidInputError("count must be positive")
    rt = record_times(n, record)
    factors = reflection_sign_pairs(cone)
    meta = {"method": "rejection"}
    if shift is not None:
        meta["shift"] = sh.tolist()
    if factorize and end is None and factors is not None and dist.is_product and cone.dimension > 1:
        marg = dist.marginal()
        cols = []
        attempts, rate = 0, 1.0
        for i, kind in enumerate(factors):
            if kind == LINE:
                cols.append(np.arange(count, dtype=np.int64))
                continue
            sub = _Runner(_Cone(HALF_LINE, 1), marg, seed, labels=[i])
            ids, att = _scan(sub, x[i : i + 1] - sh[i : i + 1], n, count, floor=floor, max_trials=max_trials,
                             batch=batch)
            cols.append(ids)
            attempts += att
            rate *= unbiased_rate(count, att)
        streams = np.stack(cols, axis=1)
        meta["method"] = "rejection-factorized"
        meta["coordinate_attempts"] = int(attempts)
        if rate < floor:
            raise AcceptanceUnderflowError(f"acceptance rate {rate:.3g} below floor {floor:g}")
    else:
        runner = _Runner(cone, dist, seed)
        ids, attempts = _scan(runner, x - sh, n, count, end=end, floor=floor, max_trials=max_trials, batch=batch)
        streams = ids
        rate = unbiased_rate(count, attempts)
    runner = _Runner(cone, dist, seed)
    pos, seg, _, final, ex = runner.run(np.broadcast_to(x, (count, len(x))), 0, n, streams, rec_times=rt, shift=sh)
    if np.any(ex != 0):
        raise AssertionError("replayed path left the cone")
    if end is not None and not np.all(final == end):
        raise AssertionError("replayed bridge missed its end point")
    return Ensemble(
        law=law, horizon=n, scale=math.sqrt(n) if n > 0 else 1.0, times=rt, positions=pos,
        seg_max=seg, start=x, seed=seed, attempts=int(attempts), cone=cone, dist=dist,
        end=None if end is None else np.asarray(end, dtype=float), acceptance=rate,
        cells=coordinate_cells(dist), spans=coordinate_spans(dist), metadata=meta,
    )


def simulate_path(cone: ConeSpec, dist: StepDistribution, x, n: int, rng_state=0, *, full=False,
                  steps=None) -> PathSample:
    """One trajectory with exit detection.

    ``rng_state`` is a seed or a (seed, stream) pair.  Explicit ``steps``
    (shape (n, d)) replace random increments.  Without ``full`` the path stops
    at the exit step.
    """
    _check_dims(cone, dist)
    x = check_start(cone, x)
    n = int(n)
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    if steps is not None:
        steps = np.asarray(steps, dtype=float).reshape(-1, cone.dimension)
        if len(steps) < n:
            raise InvalidInputError("fewer explicit steps than n")
        pos = x + np.cumsum(steps[:n], axis=0)
        inside = np.asarray(contains(cone, pos)).reshape(-1) if n else np.zeros(0, dtype=bool)
        out = np.nonzero(~inside)[0]
        ex = int(out[0]) + 1 if len(out) else None
        if ex is not None and not full:
            pos = pos[:ex]
        return PathSample(x, pos, ex)
    seed, stream = (rng_state, 0) if np.isscalar(rng_state) else rng_state
    runner = _Runner(cone, dist, seed)
    rt = np.arange(n + 1, dtype=np.int64)
    pos, _, _, _, ex = runner.run(x[None, :], 0, n, np.array([stream]), rec_times=rt, full=full)
    e = int(ex[0])
    traj = pos[0, 1:]
    if e and not full:
        traj = traj[:e]
    return PathSample(x, traj, e if e else None)


def scaled_path(path: PathSample, n: int):
    """The cadlag map t -> (x + S(floor(n t))) / sqrt(n); a stopped path stays at its exit point."""
    n = int(n)
    if n <= 0:
        raise InvalidInputError("n must be positive")
    if path.n < n and path.exit_index is None:
        raise InvalidInputError("path shorter than n without an exit")
    root = math.sqrt(n)

    def X(t):
        if not 0.0 <= t <= 1.0:
            raise InvalidInputError("t must lie in [0, 1]")
        k = int(math.floor(n * t))
        if k == 0:
            return path.start / root
        k = min(k, path.n)
        return path.positions[k - 1] / root

    return X


def max_norm(path: PathSample) -> float:
    """max over recorded k of |S(k)|, with S(0) = 0."""
    if path.n == 0:
        return 0.0
    s = path.positions - path.start
    return float(np.sqrt((s**2).sum(axis=1)).max())


def survival_probability_mc(cone: ConeSpec, dist: StepDistribution, x, n: int, replicas: int,
                            rng_seed: int, batch: int = BATCH) -> SurvivalEstimate:
    """Monte Carlo P(tau_x > n) with binomial standard error; replica r uses stream r."""
    _check_dims(cone, dist)
    x = check_start(cone, x)
    n = int(n)
    if replicas < 1:
        raise InvalidInputError("replicas must be positive")
    if n == 0:
        return SurvivalEstimate(0, x, 1.0, 0.0, replicas, "monte-carlo")
    runner = _Runner(cone, dist, rng_seed)
    alive = 0
    for t0 in range(0, replicas, batch):
        B = min(batch, replicas - t0)
        tid = np.arange(t0, t0 + B, dtype=np.uint64)
        _, _, _, _, ex = runner.run(np.broadcast_to(x, (B, len(x))), 0, n, tid)
        alive += int(np.count_nonzero(ex == 0))
    p = alive / replicas
    return SurvivalEstimate(n, x, p, math.sqrt(p * (1 - p) / replicas), replicas, "monte-carlo")


def survival_probability_exact(cone: ConeSpec, dist: StepDistribution, x, n: int) -> SurvivalEstimate:
    """Exact P(tau_x > n) for integer lattice steps."""
    from .lattice_dp import exact_survival

    p = exact_survival(cone, dist, x, [int(n)])[0]
    return SurvivalEstimate(int(n), check_start(cone, x), float(p), 0.0, 0, "exact-dp")


def fuk_nagaev_bound(n: int, x_level: float, y_level: float, d: int, dist: Optional[StepDistribution] = None) -> float:
    """Maximal inequality for P(M(n) > x) at truncation level y.

    Without ``dist`` returns 2d e^{r} (sqrt(d) n / (x y))^{r}, r = x / (sqrt(d) y);
    with ``dist`` adds the tail term n P(|X| > y).
    """
    if x_level <= 0 or y_level <= 0:
        raise InvalidInputError("levels must be positive")
    if n < 0 or d < 1:
        raise InvalidInputError("need n >= 0 and d >= 1")
    rd = math.sqrt(d)
    r = x_level / (rd * y_level)
    base = 2 * d * math.exp(r) * (rd * n / (x_level * y_level)) ** r if n > 0 else 0.0
    if dist is None:
        return base
    return base + n * step_tail(dist, y_level)


def step_tail(dist: StepDistribution, y: float) -> float:
    """P(|X| > y), exact for every shipped kind."""
    if dist.kind == "gaussian":
        return float(stats.chi2.sf(y * y, dist.dimension))
    if dist.kind == "sphere":
        return 1.0 if math.sqrt(dist.dimension) > y else 0.0
    atoms, probs = dist.support()
    norms = np.sqrt((atoms**2).sum(axis=1))
    return float(probs[norms > y].sum())
