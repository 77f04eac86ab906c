"""Increment laws with zero mean and identity covariance.

Four kinds are supported:

* ``gaussian``   standard normal vector, independent coordinates
* ``rademacher`` independent fair signs in every coordinate
* ``sphere``     uniform on the sphere of radius sqrt(d)
* ``lattice``    arbitrary finite support given as atoms and probabilities

A lattice law may also be a product of identical one-dimensional factors
(``lattice:lazy2:2``); product laws are simulated coordinate by coordinate,
which the samplers exploit for product-shaped cones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInputError, UnsupportedError

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
SPHERE = "sphere"
LATTICE = "lattice"

# codes understood by the compiled kernels
STEP_GAUSSIAN = 0
STEP_RADEMACHER = 1
STEP_SPHERE = 2
STEP_LATTICE = 3
STEP_LATTICE_PRODUCT = 4

MASS_TOL = 1e-12

# one-dimensional builtin supports, as (atoms, probabilities)
BUILTIN_LATTICES = {
    "srw": ([-1.0, 1.0], [0.5, 0.5]),
    "lazy2": ([-2.0, 0.0, 2.0], [0.125, 0.75, 0.125]),
}


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """An increment law. Use the factory functions rather than the constructor."""

    kind: str
    dimension: int
    atoms: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    # for product lattices: the one-dimensional factor shared by every coordinate
    factor: Optional["StepDistribution"] = None
    name: str = ""
    moment_order: float = math.inf
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return self.dimension

    @property
    def is_lattice(self) -> bool:
        return self.kind in (RADEMACHER, LATTICE)

    @property
    def is_product(self) -> bool:
        """Coordinates are independent and identically distributed."""
        return self.kind in (GAUSSIAN, RADEMACHER) or self.factor is not None or self.dimension == 1

    @property
    def step_code(self) -> int:
        if self.kind == GAUSSIAN:
            return STEP_GAUSSIAN
        if self.kind == RADEMACHER:
            return STEP_RADEMACHER
        if self.kind == SPHERE:
            return STEP_SPHERE
        if self.factor is not None:
            return STEP_LATTICE_PRODUCT
        return STEP_LATTICE

    def support(self):
        """Atoms and probabilities of a finite-support law, shape (A, d) and (A,)."""
        if self.kind == RADEMACHER:
            key = "support"
            if key not in self._cache:
                if self.dimension > 16:
                    raise UnsupportedError("Rademacher support enumeration limited to d <= 16")
                grid = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.dimension, indexing="ij"))
                atoms = grid.reshape(self.dimension, -1).T.copy()
                probs = np.full(len(atoms), 0.5**self.dimension)
                self._cache[key] = (atoms, probs)
            return self._cache[key]
        if self.kind == LATTICE:
            return self.atoms, self.probs
        raise UnsupportedError(f"{self.kind} steps have no finite support")

    def marginal(self) -> "StepDistribution":
        """One-dimensional factor of a product law."""
        if self.dimension == 1:
            return self
        if self.kind == GAUSSIAN:
            return gaussian(1)
        if self.kind == RADEMACHER:
            return rademacher(1)
        if self.factor is not None:
            return self.factor
        raise UnsupportedError(f"{self.name} is not a product law")

    def kernel_arrays(self):
        """(atoms, cdf) arrays for the compiled samplers."""
        if self.step_code == STEP_LATTICE:
            atoms, probs = self.atoms, self.probs
        elif self.step_code == STEP_LATTICE_PRODUCT:
            atoms, probs = self.factor.atoms, self.factor.probs
        else:
            return np.zeros((1, self.dimension)), np.ones(1)
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        return np.ascontiguousarray(atoms, dtype=np.float64), cdf

    def support_radius(self) -> float:
        if self.kind == SPHERE:
            return math.sqrt(self.dimension)
        if self.kind == GAUSSIAN:
            return math.inf
        atoms, _ = self.support()
        return float(np.sqrt((atoms**2).sum(axis=1)).max())

    def __str__(self):
        return self.name


def gaussian(d: int) -> StepDistribution:
    return StepDistribution(GAUSSIAN, _check_dim(d), name=GAUSSIAN if d == 1 else f"{GAUSSIAN}:{d}")


def rademacher(d: int) -> StepDistribution:
    return StepDistribution(RADEMACHER, _check_dim(d), name=RADEMACHER if d == 1 else f"{RADEMACHER}:{d}")


def sphere(d: int) -> StepDistribution:
    return StepDistribution(SPHERE, _check_dim(d), name=SPHERE if d == 1 else f"{SPHERE}:{d}")


def _check_dim(d) -> int:
    d = int(d)
    if d < 1:
        raise InvalidInputError("dimension must be positive")
    return d


def lattice(atoms, probs, name: str = "lattice") -> StepDistribution:
    """General finite-support law; validates masses (mean and covariance are checked
    separately by :func:`check_normalisation`)."""
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    probs = np.asarray(probs, dtype=float)
    if atoms.ndim != 2 or len(atoms) != len(probs) or len(atoms) == 0:
        raise InvalidInputError("atoms and probabilities must have matching lengths")
    if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(probs)):
        raise InvalidInputError("atoms and probabilities must be finite")
    if np.any(probs < 0):
        raise InvalidInputError("probabilities must be nonnegative")
    total = probs.sum()
    if abs(total - 1.0) > MASS_TOL:
        raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
    keep = probs > 0
    atoms, probs = atoms[keep], probs[keep]
    # merge duplicate atoms so that supports are canonical
    uniq, inv = np.unique(atoms, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.ravel(), probs)
    return StepDistribution(LATTICE, atoms.shape[1], atoms=uniq, probs=merged, name=name)


def product_lattice(base: StepDistribution, d: int, name: Optional[str] = None) -> StepDistribution:
    """The law of d independent copies of a one-dimensional lattice law."""
    if base.dimension != 1 or not base.is_lattice:
        raise InvalidInputError("product factor must be a one-dimensional lattice law")
    d = _check_dim(d)
    if d == 1:
        return base
    fa, fp = base.support()
    grids = np.meshgrid(*[fa[:, 0]] * d, indexing="ij")
    pgrids = np.meshgrid(*[fp] * d, indexing="ij")
    atoms = np.stack([g.ravel() for g in grids], axis=1)
    probs = reduce(np.multiply, [g.ravel() for g in pgrids])
    factor = base if base.kind == LATTICE else lattice(fa, fp, name=base.name)
    stem = base.name if base.name.startswith(f"{LATTICE}:") else f"{LATTICE}:{base.name}"
    return StepDistribution(LATTICE, d, atoms=atoms, probs=probs, factor=factor, name=name or f"{stem}:{d}")


def builtin_lattice(name: str, d: int = 1) -> StepDistribution:
    if name not in BUILTIN_LATTICES:
        raise InvalidInputError(f"unknown builtin lattice {name!r}; choose from {sorted(BUILTIN_LATTICES)}")
    a, p = BUILTIN_LATTICES[name]
    base = lattice(a, p, name=f"{LATTICE}:{name}")
    return base if d == 1 else product_lattice(base, d)


def read_support_file(path) -> StepDistribution:
    """Read a support file: one atom per line, ``p x_1 ... x_d``."""
    rows = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read support file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: not a list of numbers") from None
    if not rows:
        raise InvalidInputError(f"{path}: empty support file")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() < 2:
        raise InvalidInputError(f"{path}: every line needs a probability and the same number of coordinates")
    arr = np.array(rows)
    return lattice(arr[:, 1:], arr[:, 0], name=f"{LATTICE}:{path}")


def parse_steps(text: str, d: int) -> StepDistribution:
    """Parse a CLI step name for dimension d.

    ``gaussian``, ``rademacher``, ``sphere`` (optionally suffixed ``:d``), ``lattice:srw``, ``lattice:lazy2``
    (products of the builtin one-dimensional laws when d > 1) or
    ``lattice:<path>`` for a support file.
    """
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.lower()
    builders = {GAUSSIAN: gaussian, RADEMACHER: rademacher, SPHERE: sphere}
    if name in builders:
        # an explicit dimension, as in the canonical names, must match the cone
        if arg and (not arg.isdigit() or int(arg) != d):
            raise InvalidInputError(f"{text}: dimension does not match cone dimension {d}")
        return builders[name](d)
    if name == LATTICE and arg:
        base, _, power = arg.partition(":")
        if base in BUILTIN_LATTICES:
            if power and int(power) != d:
                raise InvalidInputError(f"{text}: dimension {power} does not match cone dimension {d}")
            return builtin_lattice(base, d)
        dist = read_support_file(arg)
        if dist.dimension != d:
            raise InvalidInputError(f"support file has dimension {dist.dimension}, cone has {d}")
        return dist
    raise InvalidInputError(f"unknown step distribution {text!r}")


def sample_step(dist: StepDistribution, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw increments with a caller-owned numpy Generator.

    Returns shape (d,) when ``size`` is None, else (size, d).
    """
    m = 1 if size is None else int(size)
    d = dist.dimension
    if dist.kind == GAUSSIAN:
        out = rng.standard_normal((m, d))
    elif dist.kind == RADEMACHER:
        out = 2.0 * rng.integers(0, 2, size=(m, d)) - 1.0
    elif dist.kind == SPHERE:
        g = rng.standard_normal((m, d))
        out = g / np.linalg.norm(g, axis=1, keepdims=True) * math.sqrt(d)
    else:
        atoms, probs = dist.support()
        out = atoms[rng.choice(len(atoms), size=m, p=probs)]
    return out[0] if size is None else out


@dataclass
class NormalisationReport:
    mean: np.ndarray
    covariance: np.ndarray
    mean_deviation: float
    covariance_deviation: float
    standard_error: float
    exact: bool
    passed: bool
    samples: int = 0


def exact_moments(dist: StepDistribution):
    atoms, probs = dist.support()
    mean = probs @ atoms
    cov = (atoms * probs[:, None]).T @ atoms - np.outer(mean, mean)
    return mean, cov


def check_normalisation(dist: StepDistribution, samples: int = 10**6, seed: int = 0) -> NormalisationReport:
    """Compare mean and covariance with (0, I).

    Finite-support laws are checked exactly at 1e-12. Continuous laws use
    ``samples`` draws and flag any entry beyond 4 standard errors.
    """
    d = dist.dimension
    if dist.is_lattice:
        mean, cov = exact_moments(dist)
        md = float(np.abs(mean).max())
        cd = float(np.abs(cov - np.eye(d)).max())
        return NormalisationReport(mean, cov, md, cd, 0.0, True, md < 1e-12 and cd < 1e-12)
    x = sample_step(dist, np.random.default_rng(seed), samples)
    mean = x.mean(axis=0)
    cov = (x.T @ x) / samples
    se_mean = x.std(axis=0).max() / math.sqrt(samples)
    # per-entry standard error of the second moments
    sq = np.einsum("ni,nj->nij", x[: min(samples, 200_000)], x[: min(samples, 200_000)])
    se_cov = float(sq.std(axis=0).max()) / math.sqrt(samples)
    md = float(np.abs(mean).max())
    cd = float(np.abs(cov - np.eye(d)).max())
    se = max(float(se_mean), se_cov)
    passed = md < 4 * se_mean and cd < 4 * se_cov
    return NormalisationReport(mean, cov, md, cd, se, False, bool(passed), samples)


def coordinate_cells(dist: StepDistribution) -> np.ndarray:
    """Per-coordinate lattice spacing of x + S(k) at a fixed time k.

    This is the gcd of pairwise differences of atom coordinates; it is the
    width of the cell a lattice point represents. Zero for continuous laws.
    """
    if not dist.is_lattice:
        return np.zeros(dist.dimension)
    atoms, _ = dist.support()
    cells = np.zeros(dist.dimension)
    for i in range(dist.dimension):
        diffs = np.unique(np.abs(atoms[:, i] - atoms[0, i]))
        cells[i] = _float_gcd(diffs)
    return cells


def coordinate_spans(dist: StepDistribution) -> np.ndarray:
    """Per-coordinate gcd of atom values: the spacing of coordinate values over all times."""
    if not dist.is_lattice:
        return np.zeros(dist.dimension)
    atoms, _ = dist.support()
    return np.array([_float_gcd(np.unique(np.abs(atoms[:, i]))) for i in range(dist.dimension)])


def _float_gcd(values) -> float:
    vals = [v for v in np.asarray(values, dtype=float) if v > 1e-12]
    if not vals:
        return 0.0
    if all(abs(v - round(v)) < 1e-9 for v in vals):
        return float(reduce(math.gcd, [int(round(v)) for v in vals]))
    # non-integer spacing: fall back to the smallest difference
    return float(min(vals))


def is_integer_lattice(dist: StepDistribution) -> bool:
    if not dist.is_lattice:
        return False
    atoms, _ = dist.support()
    return bool(np.all(np.abs(atoms - np.round(atoms)) < 1e-12))


def integer_support(dist: StepDistribution):
    """Integer atoms and probabilities, for lattice dynamic programs."""
    if not is_integer_lattice(dist):
        raise UnsupportedError(f"{dist.name}: dynamic programs need integer-valued lattice steps")
    atoms, probs = dist.support()
    return np.round(atoms).astype(np.int64), np.asarray(probs, dtype=float)


def advise_moments(cone, dist: StepDistribution) -> None:
    """Informational warning for exponents above 2, where a p-th moment is required."""
    from .cones import exponent

    p = exponent(cone)
    if p > 2:
        warnings.warn(
            f"cone exponent p={p:g} > 2: the increments need a finite moment of order p; "
            f"{dist.name} has all moments finite",
            stacklevel=2,
        )


def ladder_offset(dist: StepDistribution, direction=None, terms: int = 4000) -> float:
    """The constant C in E max_{k<=n} w.S(k) = sigma sqrt(2n/pi) + C + o(1).

    By Spitzer's identity E max = sum_k E[(w.S(k))^+] / k, so
    C = sigma zeta(1/2) / sqrt(2 pi) + sum_k (E[(w.S(k))^+] - sigma sqrt(k / 2 pi)) / k.
    Gaussian steps give the first term alone.  For lattice laws the series is
    summed exactly up to ``terms`` and the O(k^(-3/2)) tail is added in
    closed form.  ``direction`` defaults to the last coordinate axis.
    """
    from scipy.special import zeta

    w = np.zeros(dist.dimension) if direction is None else np.asarray(direction, dtype=float).reshape(-1)
    if direction is None:
        w[-1] = 1.0
    if len(w) != dist.dimension:
        raise InvalidInputError("direction has the wrong dimension")
    base = zeta(0.5) / math.sqrt(2 * math.pi)
    if dist.kind == GAUSSIAN:
        return float(base * np.linalg.norm(w))
    if not dist.is_lattice and dist.kind != RADEMACHER:
        raise UnsupportedError(f"no ladder offset for {dist.name} steps")
    atoms, probs = dist.support()
    v = atoms @ w
    sigma = math.sqrt(float((probs * v * v).sum()))
    if sigma == 0:
        raise InvalidInputError("the projected walk is degenerate")
    h = _float_gcd(np.unique(np.abs(v)))
    j = np.round(v / h).astype(np.int64)
    lo = int(j.min())
    step = np.zeros(int(j.max()) - lo + 1)
    np.add.at(step, j - lo, probs)
    law = np.array([1.0])
    total = 0.0
    scaled = np.empty(terms)
    for k in range(1, terms + 1):
        law = np.convolve(law, step)
        vals = h * (np.arange(len(law)) + lo * k)
        dev = float((np.clip(vals, 0, None) * law).sum()) - sigma * math.sqrt(k / (2 * math.pi))
        total += dev / k
        scaled[k - 1] = dev * math.sqrt(k)
    # dev_k ~ a / sqrt(k); average over the last stretch to smooth parity effects
    a = float(scaled[-200:].mean()) if terms >= 400 else float(scaled[-1])
    return float(sigma * base + total + 2.0 * a / math.sqrt(terms + 0.5))
