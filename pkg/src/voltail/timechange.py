"""Critical exponential moments of stochastic clocks.

The integrated CIR clock tau(T) = int_0^T v ds has E exp(lambda tau(T)) =
exp(A(T) + B(T) v0) with the Riccati system

    B' = lambda - kappa B + sigma^2 B^2 / 2,  A' = kappa theta B,  A(0) = B(0) = 0,

which blows up in finite time once lambda is large enough. The critical
moment lambda*(T) is the smallest lambda whose blow-up time is at most T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .cev import CevParams

BLOWUP_B = 1e10
STEP_FLOOR = 1e-14
LAMBDA_CAP = 1e12
LAMBDA_RTOL = 1e-6


@dataclass(frozen=True)
class CirParams:
    kappa: float
    theta: float
    sigma_v: float
    v0: float

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma_v", "v0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def mean_v(self, T: float) -> float:
        return self.theta + (self.v0 - self.theta) * math.exp(-self.kappa * T)

    def mean_integral(self, T: float) -> float:
        return self.theta * T + (self.v0 - self.theta) * (1.0 - math.exp(-self.kappa * T)) / self.kappa


@dataclass
class MgfResult:
    lam: float
    T: float
    exploded: bool
    value: float = math.nan
    log_value: float = math.nan
    blowup_time: Optional[float] = None
    A: float = math.nan
    B: float = math.nan


@dataclass(frozen=True)
class CriticalMoment:
    lambda_star: float
    T: float
    bracket: Tuple[float, float]

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo <= self.lambda_star <= hi:
            raise ValueError("lambda_star must lie inside its bracket")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lambda_star)


def cir_mgf_integrated(p: CirParams, lam: float, T: float) -> MgfResult:
    """E exp(lam int_0^T v ds), or the Riccati blow-up time if it is infinite.

    Explosion is declared when B passes 1e10 * max(1, lam T) or the adaptive
    step collapses below 1e-14 T. While B stays finite it never exceeds
    lam T, so the scaled threshold cannot fire on a finite solution.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if lam == 0:
        return MgfResult(lam, T, False, 1.0, 0.0, None, 0.0, 0.0)
    a = 0.5 * p.sigma_v ** 2
    limit = BLOWUP_B * max(1.0, abs(lam) * T)

    def rhs(s, y):
        B = y[1]
        return [p.kappa * p.theta * B, lam - p.kappa * B + a * B * B]

    def blowup(s, y):
        return abs(y[1]) - limit

    blowup.terminal = True
    sol = solve_ivp(rhs, (0.0, T), [0.0, 0.0], method="DOP853", rtol=1e-11, atol=1e-12,
                    events=blowup, first_step=min(1e-3, T / 100))
    if sol.status == 1 and len(sol.t_events[0]):
        return MgfResult(lam, T, True, math.inf, math.inf, float(sol.t_events[0][0]))
    if sol.status != 0:
        # solver gave up: step underflow at the vertical asymptote
        return MgfResult(lam, T, True, math.inf, math.inf, float(sol.t[-1]))
    A, B = sol.y[0, -1], sol.y[1, -1]
    log_value = A + B * p.v0
    return MgfResult(lam, T, False, math.exp(min(log_value, 709.0)) if log_value < 709 else math.inf,
                     float(log_value), None, float(A), float(B))


def critical_lambda(p: CirParams, T: float, rtol: float = LAMBDA_RTOL) -> CriticalMoment:
    """Bisection on the explosion flag; hi doubles from 1 until explosion or the 1e12 cap."""
    lo, hi = 0.0, 1.0
    while not cir_mgf_integrated(p, hi, T).exploded:
        lo, hi = hi, 2.0 * hi
        if hi > LAMBDA_CAP:
            return CriticalMoment(math.inf, T, (lo, math.inf))
    while hi - lo > rtol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if cir_mgf_integrated(p, mid, T).exploded:
            hi = mid
        else:
            lo = mid
    return CriticalMoment(0.5 * (lo + hi), T, (lo, hi))


def _linear_clock_path(p: CirParams, lam: float, T: float, n_steps: int):
    """RK4 for w'' + kappa w' + (sigma^2/2) lam w = 0, w(0)=1, w'(0)=0; B = -w' / (a w)."""
    a = 0.5 * p.sigma_v ** 2
    h = T / n_steps
    w, dw = 1.0, 0.0
    wmin = 1.0

    def f(w, dw):
        return dw, -p.kappa * dw - a * lam * w

    for _ in range(n_steps):
        k1 = f(w, dw)
        k2 = f(w + 0.5 * h * k1[0], dw + 0.5 * h * k1[1])
        k3 = f(w + 0.5 * h * k2[0], dw + 0.5 * h * k2[1])
        k4 = f(w + h * k3[0], dw + h * k3[1])
        w += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        dw += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        wmin = min(wmin, w)
    return w, dw, wmin


def cir_mgf_linearized(p: CirParams, lam: float, T: float, n_steps: int = 20000) -> float:
    """Independent fixed-step value of E exp(lam tau(T)) via the linearised Riccati equation.

    With B = -w'/(a w) the MGF is w(T)^(-kappa theta / a) exp(-v0 w'(T) / (a w(T)));
    it is infinite once w reaches zero on [0, T].
    """
    a = 0.5 * p.sigma_v ** 2
    w, dw, wmin = _linear_clock_path(p, lam, T, n_steps)
    if wmin <= 0:
        return math.inf
    return math.exp(-p.kappa * p.theta / a * math.log(w) - p.v0 * dw / (a * w))


def critical_lambda_dense(p: CirParams, T: float, n_steps: int = 20000) -> float:
    """lambda*(T) as the first zero of w(T; lambda), on a dense fixed-step grid.

    Scans lambda geometrically for the first sign change of w(T) and refines
    with Brent's method. Used to cross-check :func:`critical_lambda`.
    """
    g = lambda lam: _linear_clock_path(p, lam, T, n_steps)[0]
    lo, hi = 0.0, 1.0
    while g(hi) > 0:
        lo, hi = hi, hi * 1.25
        if hi > LAMBDA_CAP:
            return math.inf
    return brentq(g, lo, hi, xtol=1e-12, rtol=1e-13)


def riccati_blowup_time(p: CirParams, lam: float) -> float:
    """Closed-form blow-up time of B for lam above kappa^2 / (2 sigma^2); inf otherwise."""
    a = 0.5 * p.sigma_v ** 2
    c = lam - p.kappa ** 2 / (2.0 * p.sigma_v ** 2)
    if c <= 0:
        return math.inf
    b = p.kappa / p.sigma_v ** 2
    return (math.pi / 2 + math.atan(b * math.sqrt(a / c))) / math.sqrt(a * c)


@dataclass
class Correspondence:
    """Pairing of the clock's critical moment with an exponential moment of a CEV power."""

    cev: CevParams
    lambda_star: float
    statement: str = field(default="")

    def z(self, s):
        """z(S) = S^(-beta) / (delta |beta|), zero for absorbed paths."""
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, np.abs(s) ** (-self.cev.beta), 0.0) / (self.cev.delta * abs(self.cev.beta))

    def transform(self, s, lam: float):
        """exp(sqrt(2 lam) z(S)), whose mean is finite exactly when lam < lambda*."""
        return np.exp(math.sqrt(2.0 * lam) * self.z(s))


def cev_moment_correspondence(cev: CevParams, cm: CriticalMoment) -> Correspondence:
    if not (cm.lambda_star > 0 and math.isfinite(cm.lambda_star)):
        raise ValueError("correspondence needs a finite positive critical moment")
    text = (f"sup{{lam : E exp(sqrt(2 lam) S_T^{-cev.beta:g} / {cev.delta * abs(cev.beta):g}) < inf}}"
            f" = {cm.lambda_star:.12g}")
    return Correspondence(cev, cm.lambda_star, text)


def digital_tail_slope(cm: CriticalMoment) -> float:
    """sqrt(2 lambda*): exponential decay rate of P(z(S_T) > x) in x."""
    if not (cm.lambda_star > 0 and math.isfinite(cm.lambda_star)):
        raise ValueError("slope needs a finite positive critical moment")
    return math.sqrt(2.0 * cm.lambda_star)


def sabr_clock_gaussian_bounds(x: float, t: float, eps: float = 0.0) -> Tuple[float, float]:
    """(lower, upper) Gaussian bounds on P(tau(T)/T > x) for the SABR clock."""
    if not (x > 0 and t > 0 and eps >= 0):
        raise ValueError("need x > 0, t > 0, eps >= 0")
    q = x * x * (1.0 + eps)
    return math.exp(-q / (8.0 / 3.0 * t)), math.exp(-q / (8.0 * t))
