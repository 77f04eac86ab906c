"""Distances, goodness-of-fit statistics, exponent fits and bootstrap bands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import stats as sst

from .errors import InvalidInputError

LEVEL = 0.01


@dataclass
class KSResult:
    statistic: float
    pvalue: float
    threshold: float
    sizes: tuple
    level: float = LEVEL

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold

    def to_dict(self):
        return {
            "statistic": float(self.statistic),
            "pvalue": float(self.pvalue),
            "threshold": float(self.threshold),
            "sizes": [int(s) for s in self.sizes],
            "level": self.level,
            "passed": self.passed,
        }


def _clean(x, what="samples"):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidInputError(f"{what} are empty")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{what} contain non-finite values")
    return x


def ks_one_sample(samples, cdf: Callable, level: float = LEVEL) -> KSResult:
    """sup |F_N - F| with the exact finite-N Kolmogorov threshold and p-value."""
    x = np.sort(_clean(samples))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KSResult(d, float(sst.kstwo.sf(d, n)), float(sst.kstwo.isf(level, n)), (n,), level)


def ks_weighted(samples, weights, cdf: Callable, level: float = LEVEL) -> KSResult:
    """KS distance of a weighted empirical CDF; the threshold uses the effective size (sum w)^2 / sum w^2."""
    x = _clean(samples)
    w = _clean(weights, "weights")
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidInputError("weights must be nonnegative and not all zero")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order] / w.sum()
    hi = np.cumsum(w)
    lo = hi - w
    f = np.asarray(cdf(x), dtype=float)
    d = float(max(np.max(hi - f), np.max(f - lo)))
    neff = max(1, int(math.floor(1.0 / (w * w).sum() + 1e-9)))
    return KSResult(d, float(sst.kstwo.sf(d, neff)), float(sst.kstwo.isf(level, neff)), (x.size, neff), level)


def ks_two_sample(a, b, level: float = LEVEL) -> KSResult:
    """Two-sample KS with threshold c(level) sqrt((m + n) / (m n)), c = sqrt(-log(level / 2) / 2)."""
    a = np.sort(_clean(a, "first sample"))
    b = np.sort(_clean(b, "second sample"))
    m, n = a.size, b.size
    allv = np.concatenate([a, b])
    fa = np.searchsorted(a, allv, side="right") / m
    fb = np.searchsorted(b, allv, side="right") / n
    d = float(np.max(np.abs(fa - fb)))
    en = m * n / (m + n)
    c = math.sqrt(-math.log(level / 2.0) / 2.0)
    return KSResult(d, float(sst.kstwobign.sf(d * math.sqrt(en))), c / math.sqrt(en), (m, n), level)


def tv_distance(p, q) -> float:
    """Half the L1 distance of two finite distributions (dicts or aligned arrays)."""
    if isinstance(p, Mapping) or isinstance(q, Mapping):
        keys = set(p) | set(q)
        pv = np.array([p.get(k, 0.0) for k in keys], dtype=float)
        qv = np.array([q.get(k, 0.0) for k in keys], dtype=float)
    else:
        pv = np.asarray(p, dtype=float)
        qv = np.asarray(q, dtype=float)
        if pv.shape != qv.shape:
            raise InvalidInputError("distributions must share a support")
    if np.any(pv < 0) or np.any(qv < 0):
        raise InvalidInputError("negative mass")
    return float(0.5 * np.abs(pv - qv).sum())


def empirical_law(samples) -> dict:
    """Frequencies of hashable samples (rows are turned into tuples)."""
    arr = np.asarray(samples)
    if arr.ndim == 1:
        keys = [(float(v),) for v in arr]
    else:
        keys = [tuple(float(v) for v in row) for row in arr.reshape(len(arr), -1)]
    out = {}
    for k in keys:
        out[k] = out.get(k, 0) + 1
    n = len(keys)
    return {k: v / n for k, v in out.items()}


@dataclass
class ExponentFit:
    slope: float
    stderr: float
    band: float
    intercept: float
    horizons: np.ndarray

    def to_dict(self):
        return {
            "slope": self.slope,
            "stderr": self.stderr,
            "band": self.band,
            "intercept": self.intercept,
            "fit_horizons": [int(v) for v in self.horizons],
        }


def exponent_fit(survivals) -> ExponentFit:
    """Least-squares slope of log P against log n over the upper half of the horizon grid.

    ``band`` is the 95% t-interval half-width of the slope.
    """
    arr = np.asarray(survivals, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("expected (n, P) pairs")
    arr = arr[np.argsort(arr[:, 0])]
    n, p = arr[:, 0], arr[:, 1]
    if len(n) < 5:
        raise InvalidInputError("need at least five horizons")
    if np.any(n <= 0) or math.log10(n[-1] / n[0]) < 1.5:
        raise InvalidInputError("horizons must span at least 1.5 decades")
    k = len(n) // 2
    n, p = n[k:], p[k:]
    if np.any(p <= 0):
        raise InvalidInputError("survival estimates must be positive in the fit range")
    lx, ly = np.log(n), np.log(p)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = len(lx) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
        band = float(sst.t.ppf(0.975, dof)) * se
    else:
        se = band = 0.0
    return ExponentFit(float(coef[0]), se, band, float(coef[1]), n)


def horizon_grid(text: str) -> np.ndarray:
    """Parse "a:b:logN" (N log-spaced integers), "a:b:log10" (ten per decade) or "a:b:N" (linear)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInputError(f"bad horizon grid {text!r}; use a:b:logN or a:b:N")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise InvalidInputError(f"bad horizon grid {text!r}") from None
    if not 0 < a < b:
        raise InvalidInputError("need 0 < a < b")
    mode = parts[2]
    if mode == "log10":
        num = int(round(10 * math.log10(b / a))) + 1
        grid = np.geomspace(a, b, num)
    elif mode.startswith("log"):
        try:
            num = int(mode[3:])
        except ValueError:
            raise InvalidInputError(f"bad horizon grid {text!r}") from None
        grid = np.geomspace(a, b, num)
    else:
        try:
            num = int(mode)
        except ValueError:
            raise InvalidInputError(f"bad horizon grid {text!r}") from None
        grid = np.linspace(a, b, num)
    if num < 2:
        raise InvalidInputError("grid needs at least two points")
    return np.unique(np.round(grid).astype(np.int64))


def jitter(values, width, rng: np.random.Generator):
    """Add a centered uniform of the given width (per column): a continuity correction for lattice values."""
    v = np.asarray(values, dtype=float)
    w = np.broadcast_to(np.asarray(width, dtype=float), v.shape)
    return v + (rng.random(v.shape) - 0.5) * w


def bootstrap_band(stat_a: Callable, a, stat_b: Callable, b, resamples: int = 400, level: float = LEVEL,
                   seed: int = 0):
    """Difference stat_a(a) - stat_b(b) and the (1 - level) quantile of its bootstrap deviation.

    ``a`` and ``b`` are tuples of aligned arrays resampled by row.
    """
    rng = np.random.default_rng(seed)
    a = tuple(np.asarray(v) for v in a)
    b = tuple(np.asarray(v) for v in b)
    na, nb = len(a[0]), len(b[0])
    diff = float(stat_a(*a) - stat_b(*b))
    dev = np.empty(resamples)
    for i in range(resamples):
        ia = rng.integers(0, na, na)
        ib = rng.integers(0, nb, nb)
        dev[i] = stat_a(*(v[ia] for v in a)) - stat_b(*(v[ib] for v in b)) - diff
    return diff, float(np.quantile(np.abs(dev), 1.0 - level))


@dataclass
class ChiSquareResult:
    statistic: float
    threshold: float
    bins: int
    counts: np.ndarray
    pvalue: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold

    def to_dict(self):
        return {
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "bins": self.bins,
            "pvalue": float(self.pvalue),
            "passed": self.passed,
        }


def chi_square_uniform(u, bins: int = 20, level: float = LEVEL) -> ChiSquareResult:
    """Binned chi-square test of probability-integral-transform values against U(0, 1)."""
    u = _clean(u, "PIT values")
    if np.any(u < 0) or np.any(u > 1):
        raise InvalidInputError("PIT values must lie in [0, 1]")
    counts = np.histogram(u, bins=bins, range=(0.0, 1.0))[0]
    exp = u.size / bins
    stat = float(((counts - exp) ** 2 / exp).sum())
    return ChiSquareResult(stat, float(sst.chi2.isf(level, bins - 1)), bins, counts, float(sst.chi2.sf(stat, bins - 1)))
