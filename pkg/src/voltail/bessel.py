"""Modified Bessel function of the first kind, I_nu(z), for real nu >= 0 and z >= 0.

Small z uses the power series summed in log space; large z uses the
Hankel expansion I_nu(z) ~ e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(nu) / z^k.
Everything is computed as log I_nu(z) first, so arguments up to 1e6 and
beyond are fine.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, logsumexp

HANKEL_MAX_TERMS = 60


def crossover(nu: float) -> float:
    """Argument above which the asymptotic expansion is used."""
    return max(25.0, 10.0 * nu * nu)


def _log_series(nu: float, z: np.ndarray) -> np.ndarray:
    # terms peak near k = z/2; 40 + z/2 + 10 sqrt(z) covers the bulk and tail
    kmax = int(40 + 0.5 * z.max() + 10.0 * np.sqrt(z.max()))
    k = np.arange(kmax + 1)[:, None]
    half = np.log(0.5 * z)[None, :]
    log_terms = (2.0 * k + nu) * half - gammaln(k + 1.0) - gammaln(k + nu + 1.0)
    return logsumexp(log_terms, axis=0)


def _log_hankel_scaled(nu: float, z: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, HANKEL_MAX_TERMS + 1):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        # asymptotic series: stop once terms stop shrinking or are negligible
        active &= np.abs(nxt) < np.abs(term)
        term = np.where(active, nxt, 0.0)
        total = total + term
        active &= np.abs(term) > 1e-17 * np.abs(total)
        if not active.any():
            break
    return -0.5 * np.log(2.0 * np.pi * z) + np.log(total)


def _log_i(nu: float, z, scaled: bool):
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0) or np.any(np.isnan(za)):
        raise ValueError("z must be nonnegative")
    flat = np.atleast_1d(za).ravel()
    out = np.empty_like(flat)
    zero = flat == 0
    out[zero] = 0.0 if nu == 0 else -np.inf
    zc = crossover(nu)
    small = ~zero & (flat < zc)
    large = flat >= zc
    if small.any():
        out[small] = _log_series(nu, flat[small]) - (flat[small] if scaled else 0.0)
    if large.any():
        out[large] = _log_hankel_scaled(nu, flat[large]) + (0.0 if scaled else flat[large])
    if za.ndim == 0:
        return float(out[0])
    return out.reshape(za.shape)


def log_bessel_i(nu: float, z):
    """log I_nu(z); -inf at z = 0 for nu > 0."""
    return _log_i(nu, z, scaled=False)


def log_bessel_ie(nu: float, z):
    """log(e^-z I_nu(z)), accurate even where z itself dwarfs the result."""
    return _log_i(nu, z, scaled=True)


def bessel_i(nu: float, z):
    """I_nu(z). Overflows to inf for z beyond about 700; use :func:`log_bessel_i` there."""
    with np.errstate(over="ignore"):
        return np.exp(log_bessel_i(nu, z))
