"""Seeded Monte Carlo oracles.

Random numbers come from numpy's counter-based Philox generator. Paths are
simulated in fixed-size blocks; block ``b`` of stream ``s`` under seed
``seed`` draws from ``SeedSequence(seed, spawn_key=(s, b))``, so a path's
numbers depend only on (seed, stream, path index // block_size) and runs are
bitwise reproducible. Different processes use different stream ids, which
keeps e.g. a clock and the diffusion it drives independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from .cev import CevParams
from .timechange import CirParams
from .volmodel import DriftSpec, VolModel

STREAM_LOG_STOCK = 1
STREAM_CEV = 2
STREAM_CIR = 3
STREAM_COMPOSE = 4
STREAM_EXP_FUNCTIONAL = 5

HEAVY_TAIL_SHARE = 0.10
Z95 = 1.959963984540054


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    seed: int = 20240101
    block_size: int = 1 << 17
    stream: Optional[int] = None  # overrides the per-process default stream id

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def blocks(self, default_stream: int) -> Iterator[Tuple[slice, np.random.Generator]]:
        stream = default_stream if self.stream is None else self.stream
        for b, start in enumerate(range(0, self.n_paths, self.block_size)):
            stop = min(start + self.block_size, self.n_paths)
            ss = np.random.SeedSequence(self.seed, spawn_key=(stream, b))
            yield slice(start, stop), np.random.Generator(np.random.Philox(ss))


@dataclass
class McEstimate:
    value: float
    half_width_95: float
    n_effective: int
    heavy_tail_flag: bool
    seed: Optional[int] = None

    @property
    def std_error(self) -> float:
        return self.half_width_95 / Z95

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error


@dataclass
class CevSamples:
    terminal: np.ndarray
    absorbed_fraction: float


def _heavy(contrib: np.ndarray) -> bool:
    total = contrib.sum()
    return bool(total > 0 and contrib.max() > HEAVY_TAIL_SHARE * total)


def tail_prob(samples, threshold: float) -> McEstimate:
    """Frequency of samples above ``threshold`` with a binomial 95% half-width."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    hits = x > threshold
    p = hits.mean()
    hw = Z95 * math.sqrt(p * (1.0 - p) / x.size)
    return McEstimate(float(p), hw, int(x.size), _heavy(hits.astype(float)))


def expectation(samples, transform: Optional[Callable] = None) -> McEstimate:
    """Sample mean of transform(samples) with a normal-approximation 95% half-width.

    The heavy-tail flag trips when one sample carries more than 10% of the
    total absolute mass, the usual sign that the mean is not yet settled or
    does not exist.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    with np.errstate(over="ignore"):
        y = x if transform is None else np.asarray(transform(x), dtype=float)
    n = y.size
    mean = float(y.mean())
    sd = float(y.std(ddof=1)) if n > 1 else 0.0
    flag = _heavy(np.abs(y)) or not math.isfinite(mean)
    return McEstimate(mean, Z95 * sd / math.sqrt(n) if math.isfinite(sd) else math.inf, n, flag)


def running_means(values, checkpoints) -> np.ndarray:
    """Means of the first n values for each n in ``checkpoints``."""
    c = np.cumsum(np.asarray(values, dtype=float))
    return np.array([c[n - 1] / n for n in checkpoints])


def simulate_log_stock(model: VolModel, drift: DriftSpec, x0: float, t: float, cfg: McConfig) -> np.ndarray:
    """Euler-Maruyama terminal values of dX = b(X) ds + sigma(s, X) dW on [0, t]."""
    if not t > 0:
        raise ValueError("t must be positive")
    dt = t / cfg.n_steps
    sq = math.sqrt(dt)
    out = np.empty(cfg.n_paths)
    for sl, rng in cfg.blocks(STREAM_LOG_STOCK):
        x = np.full(sl.stop - sl.start, float(x0))
        z = np.empty_like(x)
        for k in range(cfg.n_steps):
            b, sig = drift.sde_coefficients(model, x, k * dt)
            rng.standard_normal(out=z)
            z *= sq
            z *= sig
            b *= dt
            x += b
            x += z
        out[sl] = x
    return out


def _cev_paths(p: CevParams, horizons: np.ndarray, n_steps: np.ndarray, rng, x0: float) -> np.ndarray:
    """Euler with absorption at the first nonpositive iterate; per-path horizon and step count."""
    x = np.full(horizons.shape, float(x0))
    dt = horizons / n_steps
    sq = np.sqrt(dt)
    e = 1.0 + p.beta
    alive = horizons > 0
    z = np.empty_like(x)
    for k in range(int(n_steps.max()) if n_steps.size else 0):
        rng.standard_normal(out=z)
        act = alive & (k < n_steps)
        xa = x[act]
        xa = xa + p.delta * xa ** e * sq[act] * z[act]
        dead = xa <= 0
        xa[dead] = 0.0
        x[act] = xa
        alive[np.flatnonzero(act)[dead]] = False
    return x


def simulate_cev(p: CevParams, cfg: McConfig) -> CevSamples:
    """Terminal CEV values at p.T; absorbed paths are 0."""
    out = np.empty(cfg.n_paths)
    for sl, rng in cfg.blocks(STREAM_CEV):
        m = sl.stop - sl.start
        out[sl] = _cev_paths(p, np.full(m, p.T), np.full(m, cfg.n_steps), rng, p.x0)
    return CevSamples(out, float(np.mean(out == 0.0)))


def simulate_cir_and_integral(p: CirParams, T: float, cfg: McConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(v_T, int_0^T v ds): full-truncation Euler for v, trapezoid rule for the integral."""
    dt = T / cfg.n_steps
    sq = math.sqrt(dt)
    vT = np.empty(cfg.n_paths)
    integral = np.empty(cfg.n_paths)
    for sl, rng in cfg.blocks(STREAM_CIR):
        m = sl.stop - sl.start
        v = np.full(m, p.v0)
        acc = np.zeros(m)
        z = np.empty(m)
        for _ in range(cfg.n_steps):
            vp = np.maximum(v, 0.0)
            rng.standard_normal(out=z)
            nxt = v + p.kappa * (p.theta - vp) * dt + p.sigma_v * np.sqrt(vp) * sq * z
            acc += 0.5 * (vp + np.maximum(nxt, 0.0)) * dt
            v = nxt
        vT[sl] = np.maximum(v, 0.0)
        integral[sl] = acc
    return vT, integral


def compose_time_change(cev: CevParams, clock_samples, cfg: McConfig, min_steps: int = 16) -> np.ndarray:
    """Samples of S_T = X_{tau(T)} with X a CEV path run to each clock draw tau_i.

    Path i takes max(min_steps, ceil(n_steps * tau_i / cev.T)) Euler steps, so
    the step size is about cev.T / n_steps whatever the clock value. The
    diffusion draws its own stream, disjoint from any clock stream.
    """
    tau = np.asarray(clock_samples, dtype=float)
    if tau.ndim != 1 or tau.size != cfg.n_paths:
        raise ValueError("need one clock sample per path")
    if np.any(tau < 0):
        raise ValueError("clock samples must be nonnegative")
    steps = np.maximum(min_steps, np.ceil(cfg.n_steps * tau / cev.T)).astype(int)
    out = np.empty(cfg.n_paths)
    for sl, rng in cfg.blocks(STREAM_COMPOSE):
        out[sl] = _cev_paths(cev, tau[sl], steps[sl], rng, cev.x0)
    return out


def simulate_exponential_functional(mu: float, t: float, cfg: McConfig) -> np.ndarray:
    """A_t = int_0^t exp(2 (B_s + mu s)) ds by the trapezoid rule on Brownian paths."""
    dt = t / cfg.n_steps
    sq = math.sqrt(dt)
    out = np.empty(cfg.n_paths)
    for sl, rng in cfg.blocks(STREAM_EXP_FUNCTIONAL):
        m = sl.stop - sl.start
        b = np.zeros(m)
        prev = np.ones(m)
        acc = np.zeros(m)
        z = np.empty(m)
        for k in range(1, cfg.n_steps + 1):
            rng.standard_normal(out=z)
            b += sq * z
            cur = np.exp(2.0 * (b + mu * k * dt))
            acc += 0.5 * (prev + cur) * dt
            prev = cur
        out[sl] = acc
    return out
