"""Eigenfunction contracts and recovery of the clock's Laplace transform.

For S_t = X_{tau(t)} with tau independent of X and psi_lam an increasing
eigenfunction of X's generator (G psi = lam psi, psi(0+) = 0),

    E exp(lam tau(T)) = E psi_lam(S_T) / psi_lam(S_0).

Brownian X: psi_lam(s) = exp(sqrt(2 lam) x) with x = log(s / anchor), i.e.
samples are passed as levels s = anchor * e^X of the Brownian state X.
CEV X: psi_lam(s) = s^(1/2) I_nu(sqrt(2 lam) z(s)), z(s) = s^(-beta) / (delta |beta|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .bessel import log_bessel_i
from .cev import CevParams
from .montecarlo import McEstimate, expectation

KINDS = ("brownian", "cev")


class ReplicationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenContract:
    lam: float
    kind: str = "brownian"
    cev: Optional[CevParams] = None
    anchor: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind == "cev" and self.cev is None:
            raise ValueError("cev kind needs CevParams")
        if not self.anchor > 0:
            raise ValueError("anchor must be positive")

    def z(self, s):
        p = self.cev
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, np.abs(s) ** (-p.beta), 0.0) / (p.delta * abs(p.beta))


def log_eigenfunction_value(c: EigenContract, s):
    """log psi_lam(s); -inf at s = 0 for the cev kind (killed paths)."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or (c.kind == "brownian" and np.any(s == 0)):
        raise ValueError("s must be positive")
    r = math.sqrt(2.0 * c.lam)
    if c.kind == "brownian":
        out = r * np.log(s / c.anchor)
    else:
        out = np.full(s.shape, -np.inf)
        pos = s > 0
        out[pos] = 0.5 * np.log(s[pos]) + log_bessel_i(c.cev.nu, r * c.z(s[pos]))
    return float(out) if out.ndim == 0 else out


def eigenfunction_value(c: EigenContract, s):
    with np.errstate(over="ignore"):
        return np.exp(log_eigenfunction_value(c, s))


def eigen_ratio(c: EigenContract, s, s0: float):
    """psi_lam(s) / psi_lam(s0), formed in log space."""
    with np.errstate(over="ignore"):
        return np.exp(log_eigenfunction_value(c, s) - log_eigenfunction_value(c, s0))


def recover_clock_laplace(c: EigenContract, s0: float, samples=None,
                          density: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> McEstimate:
    """Estimate E exp(lam tau(T)) from terminal samples of S_T or from a density on a grid.

    Sample path: mean of psi(S_T)/psi(s0) with a 95% half-width and the
    heavy-tail flag from :func:`voltail.montecarlo.expectation`. Density path:
    trapezoid rule over (grid, values); mass missing from the density (killed
    paths) contributes nothing, and the half-width is reported as 0.
    """
    if (samples is None) == (density is None):
        raise ValueError("give exactly one of samples or density")
    if samples is not None:
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            raise ValueError("no samples")
        return expectation(x, lambda s: eigen_ratio(c, s, s0))
    grid, values = (np.asarray(a, dtype=float) for a in density)
    if grid.shape != values.shape or grid.size < 2:
        raise ValueError("density grid and values must be matching arrays")
    return McEstimate(float(np.trapezoid(eigen_ratio(c, grid, s0) * values, grid)), 0.0, int(grid.size), False)


@dataclass
class ReplicationWeights:
    """Static portfolio g(S) = cash + forward (S - F) + sum puts + sum calls."""

    forward_point: float
    cash: float
    forward: float
    put_strikes: List[float] = field(default_factory=list)
    put_weights: List[float] = field(default_factory=list)
    call_strikes: List[float] = field(default_factory=list)
    call_weights: List[float] = field(default_factory=list)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        F = self.forward_point
        out = self.cash + self.forward * (s - F)
        kp, wp = np.asarray(self.put_strikes), np.asarray(self.put_weights)
        kc, wc = np.asarray(self.call_strikes), np.asarray(self.call_weights)
        out = out + (np.maximum(kp[:, None] - s[None, ...], 0.0) * wp[:, None]).sum(axis=0) if kp.size else out
        out = out + (np.maximum(s[None, ...] - kc[:, None], 0.0) * wc[:, None]).sum(axis=0) if kc.size else out
        return float(out) if out.ndim == 0 else out

    def rows(self):
        """(type, strike, weight) rows for CSV emission, cash and forward first."""
        yield ("cash", self.forward_point, self.cash)
        yield ("forward", self.forward_point, self.forward)
        for k, w in zip(self.put_strikes, self.put_weights):
            yield ("put", k, w)
        for k, w in zip(self.call_strikes, self.call_weights):
            yield ("call", k, w)


def _fd(payoff, x, order, h):
    if order == 1:
        return (payoff(x + h) - payoff(x - h)) / (2 * h)
    return (payoff(x + h) - 2 * payoff(x) + payoff(x - h)) / (h * h)


def replication_weights(payoff: Callable, forward_point: float, strike_grid: Sequence[float],
                        d1: Optional[Callable] = None, d2: Optional[Callable] = None,
                        tolerance: Optional[float] = None) -> ReplicationWeights:
    """Carr-Madan weights: cash g(F), forward g'(F), options g''(K) dK by the trapezoid rule.

    The expansion point is merged into the grid. Derivatives are taken by
    central differences unless ``d1``/``d2`` are given. With ``tolerance``
    the reconstruction is checked at interior grid strikes and
    :class:`ReplicationError` is raised when it is worse.
    """
    F = float(forward_point)
    grid = np.unique(np.append(np.asarray(strike_grid, dtype=float), F))
    if grid[0] <= 0 or grid[0] >= F or grid[-1] <= F:
        raise ValueError("strike grid must be positive and straddle the forward point")
    h = 1e-4 * max(1.0, F)
    g = lambda x: np.asarray(payoff(np.asarray(x, dtype=float)), dtype=float)
    gp = d1(F) if d1 is not None else _fd(g, F, 1, h)
    curv = np.asarray(d2(grid) if d2 is not None else _fd(g, grid, 2, 1e-4 * np.maximum(1.0, grid)), dtype=float)
    curv = curv * np.ones_like(grid)
    i = int(np.searchsorted(grid, F))
    below, above = grid[: i + 1], grid[i:]
    tw = lambda k: np.concatenate([[0.5 * (k[1] - k[0])], 0.5 * (k[2:] - k[:-2]), [0.5 * (k[-1] - k[-2])]])
    w = ReplicationWeights(F, float(g(F)), float(gp),
                           below.tolist(), (curv[: i + 1] * tw(below)).tolist(),
                           above.tolist(), (curv[i:] * tw(above)).tolist())
    if tolerance is not None:
        interior = grid[1:-1]
        err = float(np.max(np.abs(w.value(interior) - g(interior))))
        if err > tolerance:
            raise ReplicationError(f"grid too coarse: interior reconstruction error {err:.3g} > {tolerance:.3g}")
    return w


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    slope: float
    note: str

    @property
    def verdict(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def subexponential_feasibility(clock_tail_slope: float) -> Feasibility:
    """Single-smile recovery of the clock needs -limsup log P(tau > x) / x = +inf.

    Any finite slope means E exp(theta tau) explodes for some theta, hence
    E exp(sqrt(theta) z(S_T)) is infinite and the eigenfunction contracts for
    the Fourier inversion cannot all be priced.
    """
    if clock_tail_slope < 0 or math.isnan(clock_tail_slope):
        raise ValueError("slope must be nonnegative")
    if math.isinf(clock_tail_slope):
        return Feasibility(True, clock_tail_slope, "clock tail decays faster than every exponential")
    return Feasibility(False, clock_tail_slope,
                       f"clock tail is only exponential (slope {clock_tail_slope:.6g}); "
                       "E exp(sqrt(theta) z(S_T)) is infinite for large theta, so the required "
                       "eigenfunction contracts are not all finite")


def clock_tail_slope(lambda_star: float) -> float:
    """Exponential tail slope of the clock: its critical moment (inf for bounded clocks)."""
    return float(lambda_star)
