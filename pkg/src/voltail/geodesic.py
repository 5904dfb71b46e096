"""One-dimensional geodesic distance d(y, u) = int_y^u dz / sigma(z) and tail estimates built on it."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr

from .volmodel import VolModel

QUAD_ABS_TOL = 1e-10
ROOT_XTOL = 1e-12


class QuadratureError(RuntimeError):
    pass


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class DossBounds:
    """Constants C1 <= C2 bounding the drift of the Doss auxiliary ODE."""

    c1: float
    c2: float

    def __post_init__(self):
        if self.c1 > self.c2:
            raise ValueError(f"need c1 <= c2, got c1={self.c1}, c2={self.c2}")

    @classmethod
    def for_constant_vol(cls, sigma0: float) -> "DossBounds":
        c = -0.5 * sigma0 * sigma0
        return cls(c, c)


def geodesic_distance(model: VolModel, y: float, u: float) -> float:
    """Signed distance int_y^u dz / sigma(z) by adaptive Gauss-Kronrod quadrature."""
    if y == u:
        return 0.0
    if model.kind == "constant":
        return (u - y) / model.sigma0
    lo, hi = (y, u) if y < u else (u, y)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(lambda z: 1.0 / float(model.sigma(z)), lo, hi,
                            epsabs=QUAD_ABS_TOL, epsrel=1e-13, limit=500)
        except IntegrationWarning as exc:
            raise QuadratureError(f"geodesic quadrature on [{lo}, {hi}] did not converge: {exc}") from exc
    return val if y < u else -val


def inverse_geodesic(model: VolModel, y: float, x: float) -> float:
    """Return u with d(y, u) = x.

    The volatility bounds give the bracket y + x*[sigma_lo, sigma_hi]; if the
    bounds are loose or missing it is widened by doubling.
    """
    if x == 0:
        return float(y)
    f = lambda u: geodesic_distance(model, y, u) - x
    sign = 1.0 if x > 0 else -1.0
    lo_s = model.sigma_lo if model.sigma_lo > 0 else 1e-3
    hi_s = model.sigma_hi if math.isfinite(model.sigma_hi) else 10.0 * lo_s
    a = y + sign * abs(x) * lo_s * (1 - 1e-9)
    b = y + sign * abs(x) * hi_s * (1 + 1e-9)
    if b == y:
        # offset below one ulp of y: y itself is the nearest representable root
        return float(y)
    fa, fb = f(a), f(b)
    step = abs(b - y)
    for _ in range(200):
        if fa * sign <= 0 <= fb * sign:
            break
        if fa * sign > 0:
            # start too far out: pull toward y
            a = y + (a - y) * 0.5
            fa = f(a)
        if fb * sign < 0:
            step *= 2.0
            b = y + sign * step
            fb = f(b)
    else:
        raise BracketError(f"could not bracket inverse geodesic for y={y}, x={x}")
    if fa == 0:
        return a
    if fb == 0:
        return b
    return brentq(f, min(a, b), max(a, b), xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def doss_tail_asymptote(model: VolModel, x0: float, x: float, t: float) -> float:
    """Leading-order tail exponent d(x0, x)^2 / (2 t) of -log P(X_t > x)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not x > x0:
        raise ValueError("need x > x0")
    d = geodesic_distance(model, x0, x)
    return d * d / (2.0 * t)


def _sandwich_args(model, bounds, x0, x, t):
    d = geodesic_distance(model, x0, x)
    shift1 = abs(geodesic_distance(model, bounds.c1 * t + x0, x0))
    shift2 = abs(geodesic_distance(model, bounds.c2 * t + x0, x0))
    rt = math.sqrt(t)
    return (d + shift1) / rt, (d - shift2) / rt


def doss_sandwich_tail(model: VolModel, bounds: DossBounds, x0: float, x: float, t: float) -> Tuple[float, float]:
    """Lower and upper estimates of P(X_t > x) from the arithmetic-Brownian sandwich.

    lower = Phi^c((d(x0,x) + |d(C1 t + x0, x0)|) / sqrt t)
    upper = Phi^c((d(x0,x) - |d(C2 t + x0, x0)|) / sqrt t)
    """
    if not t > 0:
        raise ValueError("t must be positive")
    z_lo, z_hi = _sandwich_args(model, bounds, x0, x, t)
    return float(ndtr(-z_lo)), float(ndtr(-z_hi))


def doss_sandwich_log_tail(model: VolModel, bounds: DossBounds, x0: float, x: float, t: float) -> Tuple[float, float]:
    """Logs of :func:`doss_sandwich_tail`, finite far beyond where the plain values underflow."""
    z_lo, z_hi = _sandwich_args(model, bounds, x0, x, t)
    return float(log_ndtr(-z_lo)), float(log_ndtr(-z_hi))


def geodesic_curve(model: VolModel, y: float, u_grid: Iterable[float]) -> List[Tuple[float, float, float]]:
    """Rows (y, u, d(y, u)) for CSV emission."""
    return [(float(y), float(u), geodesic_distance(model, y, u)) for u in u_grid]
