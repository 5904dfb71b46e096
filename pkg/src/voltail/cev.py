"""Stopped CEV process dX = delta X^(1+beta) dW (beta < 0), absorbed at zero.

Transition density, absorption probability, right-tail asymptotics and the
implied-volatility wing formulas for CEV and general local-vol models.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gammaincc

from .bessel import log_bessel_ie


SURVIVAL_ABS_TOL = 1e-10


class CevQuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class CevParams:
    delta: float
    beta: float
    x0: float
    T: float

    def __post_init__(self):
        if not self.beta < 0:
            raise ValueError(f"beta must be negative, got {self.beta}")
        if not (self.delta > 0 and self.x0 > 0 and self.T > 0):
            raise ValueError("delta, x0 and T must be positive")

    @property
    def nu(self) -> float:
        return 1.0 / (2.0 * abs(self.beta))

    @property
    def scale(self) -> float:
        """2 delta^2 beta^2 T, the common denominator of the tail exponents."""
        return 2.0 * self.delta ** 2 * self.beta ** 2 * self.T

    def with_T(self, T: float) -> "CevParams":
        return CevParams(self.delta, self.beta, self.x0, T)


@dataclass(frozen=True)
class WingPoint:
    k: float
    ratio: float

    def __post_init__(self):
        if self.ratio < 0:
            raise ValueError("wing ratio must be nonnegative")


def cev_log_density(p: CevParams, x):
    """log p(T; x0, x) of the surviving part of the law, stable for large x."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("x must be positive")
    b = abs(p.beta)
    d2b2T = p.delta ** 2 * p.beta ** 2 * p.T
    lx = np.log(xa)
    xb, x0b = np.exp(b * lx), p.x0 ** b
    # exp(-(a^2 + c^2)/2s) I(ac/s) = exp(-(a - c)^2/2s) * e^{-ac/s} I(ac/s), keeps the big terms cancelled
    arg = x0b * xb / d2b2T
    out = ((2.0 * b - 1.5) * lx + 0.5 * math.log(p.x0) - math.log(p.delta ** 2 * b * p.T)
           - (x0b - xb) ** 2 / (2.0 * d2b2T) + log_bessel_ie(p.nu, arg))
    return float(out) if xa.ndim == 0 else out


def cev_density(p: CevParams, x):
    return np.exp(cev_log_density(p, x))


def _u_density(p: CevParams, u: float) -> float:
    """Density of U = X^|beta| on survival; smooth (linear) at u = 0."""
    if u <= 0:
        return 0.0
    b = abs(p.beta)
    x = u ** (1.0 / b)
    return math.exp(float(cev_log_density(p, x)) + (1.0 / b - 1.0) * math.log(u) - math.log(b))


def cev_survival_mass(p: CevParams) -> float:
    """int_0^inf p(T; x0, x) dx by adaptive quadrature in u = x^|beta|."""
    b = abs(p.beta)
    u0 = p.x0 ** b
    s = p.delta * b * math.sqrt(p.T)  # diffusion scale of U near u0
    hi = u0 + 60.0 * s
    pts = sorted({0.0, *[max(0.0, u0 + k * s) for k in (-40, -20, -10, -5, -2, -1, 0, 1, 2, 5, 10, 20, 40)], hi})
    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings on the narrow panels are judged by the error estimate instead
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, c in zip(pts[:-1], pts[1:]):
            if c <= a:
                continue
            val, err = quad(lambda u: _u_density(p, u), a, c, epsabs=1e-14, epsrel=1e-12, limit=200)
            if not err <= SURVIVAL_ABS_TOL:
                raise CevQuadratureError(f"density quadrature on [{a}, {c}] failed: error estimate {err:g}")
            total += val
    # remaining tail beyond hi is below exp(-1800)
    return total


def cev_absorption_prob(p: CevParams) -> float:
    """P(absorbed by T) defined as the defect 1 - int p dx of the density."""
    return float(min(1.0, max(0.0, 1.0 - cev_survival_mass(p))))


def cev_absorption_closed_form(p: CevParams) -> float:
    """Regularised upper incomplete gamma Q(nu, x0^(2|beta|) / (2 delta^2 beta^2 T)); cross-check only."""
    return float(gammaincc(p.nu, p.x0 ** (2.0 * abs(p.beta)) / p.scale))


def cev_tail_asymptote(p: CevParams, x):
    """x^(2|beta|) / (2 delta^2 beta^2 T), the leading term of -log p."""
    return np.asarray(x, dtype=float) ** (2.0 * abs(p.beta)) / p.scale


def wing_psi(x):
    """psi(x) = 2 - 4 (sqrt(x^2 + x) - x), decreasing from psi(0) = 2 to psi(inf) = 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("psi needs x >= 0")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        root = np.sqrt(xa * xa + xa)
        small = 2.0 - 4.0 * np.where(xa == 0, 0.0, xa / (root + xa))
        # same quantity as 2x / (sqrt(x^2 + x) + x)^2, free of cancellation for large x
        large = 2.0 * xa / (root + xa) ** 2
        out = np.where(xa < 1.0, small, large)
    out = np.where(np.isinf(xa), 0.0, out)
    return float(out) if xa.ndim == 0 else out


def cev_wing_asymptote(p: CevParams, k):
    """I^2(k)/k ~ k (x0 e^k)^(-2|beta|) delta^2 beta^2; maturity does not enter."""
    k = np.asarray(k, dtype=float)
    out = k * np.exp(-2.0 * abs(p.beta) * (math.log(p.x0) + k)) * p.delta ** 2 * p.beta ** 2
    return float(out) if out.ndim == 0 else out


def cev_wing_from_psi(p: CevParams, k):
    """psi(-log f(k)/k - 1) / T with -log f(k) ~ (x0 e^k)^(2|beta|) / (2 delta^2 beta^2 T)."""
    k = np.asarray(k, dtype=float)
    L = np.exp(2.0 * abs(p.beta) * (math.log(p.x0) + k)) / p.scale
    out = wing_psi(L / k - 1.0) / p.T
    return float(out) if np.ndim(out) == 0 else out


def locvol_wing_asymptote(k, energy):
    """I^2(k)/k ~ k / (2 E), with E the energy to the level x0 + k."""
    energy = np.asarray(energy, dtype=float)
    if np.any(energy <= 0):
        raise ValueError("energy must be positive")
    out = np.asarray(k, dtype=float) / (2.0 * energy)
    return float(out) if out.ndim == 0 else out
