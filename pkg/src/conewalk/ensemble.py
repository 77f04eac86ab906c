"""Recorded ensembles of paths: snapshots plus running maxima between snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError

# columns of seg_max
SEG_NORM = 0
SEG_TOP = 1
SEG_RANGE = 2


def record_times(n: int, record="quarters") -> np.ndarray:
    """Snapshot indices: "quarters" (0, n/4, n/2, 3n/4, n), "end", "full" or explicit."""
    if n < 0:
        raise InvalidInputError("horizon must be nonnegative")
    if isinstance(record, str):
        if record == "quarters":
            t = [0, n // 4, n // 2, (3 * n) // 4, n]
        elif record == "end":
            t = [0, n]
        elif record == "full":
            t = range(n + 1)
        else:
            raise InvalidInputError(f"unknown record mode {record!r}")
    else:
        t = [int(v) for v in record]
        if any(v < 0 or v > n for v in t):
            raise InvalidInputError("record times must lie in [0, n]")
        t = [0] + t + [n]
    return np.unique(np.asarray(list(t), dtype=np.int64))


@dataclass
class Ensemble:
    """A collection of paths observed at integer times ``times``.

    ``positions[i, j]`` is path i at time ``times[j]``; ``seg_max[i, j]``
    holds maxima over (times[j], times[j+1]] of the norm, the last coordinate
    and |last - first|.  Scaled views divide by ``scale`` and map time index k
    to k / horizon.
    """

    law: str
    horizon: int
    scale: float
    times: np.ndarray
    positions: np.ndarray
    seg_max: np.ndarray
    start: np.ndarray
    seed: int
    attempts: int
    cone: object = None
    dist: object = None
    end: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    acceptance: float = 1.0
    # per-coordinate lattice cell widths and coordinate spans (0 for continuous laws)
    cells: Optional[np.ndarray] = None
    spans: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[2]

    def time_index(self, t: float) -> int:
        """Column of the snapshot at time floor(horizon * t)."""
        if not 0.0 <= t <= 1.0:
            raise InvalidInputError("t must lie in [0, 1]")
        k = int(math.floor(self.horizon * t + 1e-12))
        hits = np.nonzero(self.times == k)[0]
        if len(hits) == 0:
            raise InvalidInputError(f"time {k} was not recorded (recorded: {self.times.tolist()})")
        return int(hits[0])

    def at(self, t: float) -> np.ndarray:
        """Scaled positions X(t), shape (count, d)."""
        return self.positions[:, self.time_index(t)] / self.scale

    def final(self) -> np.ndarray:
        return self.positions[:, -1]

    def running_max(self, column: int, t: float = 1.0, t0: float = 0.0) -> np.ndarray:
        """Scaled maximum over [t0, t] of a seg_max column, snapshot at t0 included."""
        j0, j1 = self.time_index(t0), self.time_index(t)
        p0 = self.positions[:, j0]
        if column == SEG_NORM:
            base = np.sqrt((p0**2).sum(axis=1))
        elif column == SEG_TOP:
            base = p0[:, -1].copy()
        else:
            base = np.abs(p0[:, -1] - p0[:, 0])
        if j1 > j0:
            base = np.maximum(base, self.seg_max[:, j0:j1, column].max(axis=1))
        return base / self.scale

    def paths(self):
        """PathSample objects; requires full recording."""
        from .engine import PathSample

        if len(self.times) != self.horizon + 1:
            raise InvalidInputError("paths() needs an ensemble recorded with record='full'")
        return [PathSample(self.start.copy(), self.positions[i, 1:].copy(), None) for i in range(self.count)]

    def summary(self) -> dict:
        return {
            "law": self.law,
            "count": self.count,
            "horizon": self.horizon,
            "attempts": int(self.attempts),
            "acceptance_rate": float(self.acceptance),
            "seed": int(self.seed),
            "start": [float(v) for v in self.start],
            "end": None if self.end is None else [float(v) for v in self.end],
            "cone": None if self.cone is None else str(self.cone),
            "steps": None if self.dist is None else str(self.dist),
            "metadata": self.metadata,
        }
