"""Modified Bessel function of the first kind in log space."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp


def _log_series(nu: float, z: np.ndarray) -> np.ndarray:
    # log sum_k (z/2)^(2k+nu) / (k! Gamma(k+nu+1)), all terms positive
    lz = np.log(z / 2.0)
    kmax = int(np.max(z)) + 20 * int(math.sqrt(np.max(z)) + 1) + 40
    k = np.arange(kmax + 1, dtype=float)
    terms = (2.0 * k[None, :] + nu) * lz[:, None] - gammaln(k + 1.0)[None, :] - gammaln(k + nu + 1.0)[None, :]
    return logsumexp(terms, axis=1)


def _log_hankel(nu: float, z: np.ndarray) -> np.ndarray:
    # e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(nu) / z^k, truncated at the smallest term
    mu = 4.0 * nu * nu
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 200):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        active &= np.abs(nxt) < np.abs(term)
        if not active.any():
            break
        term = np.where(active, nxt, term)
        total = total + np.where(active, nxt, 0.0)
        active &= np.abs(nxt) > 1e-17 * np.abs(total)
    return z - 0.5 * np.log(2.0 * np.pi * z) + np.log(total)


def log_iv(nu: float, z) -> np.ndarray:
    """log I_nu(z) for nu >= 0 and z > 0.

    The positive-term power series is summed in log space while
    z < max(20, nu^2); above that the Hankel expansion is used.
    """
    nu = float(nu)
    if nu < 0:
        raise ValueError("order must be nonnegative")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise ValueError("argument must be positive and finite")
    out = np.empty_like(z)
    big = z >= max(20.0, nu * nu)
    if np.any(~big):
        out[~big] = _log_series(nu, z[~big])
    if np.any(big):
        out[big] = _log_hankel(nu, z[big])
    return float(out[0]) if scalar else out
