"""Energy functional E(t, x; u, y) = inf over paths of 1/2 int (g' - mu)^2 / sigma^2 ds.

Two independent solvers:

* :func:`solve_euler_lagrange` shoots on the second-order Euler-Lagrange ODE
  with fixed-step RK4, Newton/secant on the initial velocity, multistart, and
  keeps the cheapest stationary path.
* :func:`direct_minimize_energy` minimises the trapezoid-discretised
  functional over piecewise-linear paths by preconditioned gradient descent
  with Armijo backtracking.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .geodesic import geodesic_distance
from .volmodel import DriftSpec, VolModel

log = logging.getLogger(__name__)

MIN_GRID = 64
MULTISTART_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)
ARMIJO = 1e-4


class EnergySolverError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class EnergyProblem:
    t: float
    u_time: float
    x: float
    y: float
    model: VolModel
    drift: DriftSpec = field(default_factory=DriftSpec.driftless_log_stock)

    def __post_init__(self):
        if not self.u_time > self.t:
            raise ValueError(f"need u_time > t, got t={self.t}, u={self.u_time}")

    @property
    def duration(self) -> float:
        return self.u_time - self.t

    def tolerance(self) -> float:
        return 1e-6 * max(1.0, abs(self.y - self.x))


@dataclass
class EnergySolution:
    energy: float
    s: np.ndarray
    path: np.ndarray
    method: str
    residual: float
    multistart_count: int
    n_stationary: int = 1
    initial_velocity: float = math.nan
    history: List[float] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_grid(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class NsBounds:
    """Coefficient bounds lambda^-1 <= a <= lambda (a = sigma^2/2) and Lambda >= 0."""

    lambda_cap: float
    Lambda_cap: float = 0.0

    def __post_init__(self):
        if self.lambda_cap < 1:
            raise ValueError("lambda_cap must be >= 1")
        if self.Lambda_cap < 0:
            raise ValueError("Lambda_cap must be >= 0")

    @classmethod
    def from_model(cls, model: VolModel, drift: DriftSpec, domain=(-20.0, 20.0), n=40_001) -> "NsBounds":
        """Smallest admissible caps for ``model``.

        lambda comes from the sigma range. Lambda bounds |b|_a^2 with the
        split b_hat = 0, c = 0, b = mu / a, i.e. Lambda = sup mu^2 / a on a
        dense grid over ``domain``.
        """
        a_lo = 0.5 * model.sigma_lo ** 2
        a_hi = 0.5 * model.sigma_hi ** 2
        lam = max(1.0, 1.0 / a_lo, a_hi)
        grid = np.linspace(domain[0], domain[1], n)
        s = model.sigma(grid)
        mu = drift.mu(model, grid)
        Lam = float(np.max(mu * mu / (0.5 * s * s)))
        return cls(lam, Lam)

    def check_model(self, model: VolModel, domain=(-20.0, 20.0), n=10_001) -> bool:
        grid = np.linspace(domain[0], domain[1], n)
        a = 0.5 * model.sigma(grid) ** 2
        return bool(np.all(a >= 1.0 / self.lambda_cap) and np.all(a <= self.lambda_cap))


@dataclass(frozen=True)
class NsCheck:
    inside: bool
    lower: float
    upper: float
    lower_margin: float
    upper_margin: float

    @property
    def strictly_inside(self) -> bool:
        return self.lower < self.upper and self.lower_margin > 0 and self.upper_margin > 0


def lagrangian(problem: EnergyProblem, s, g, gdot):
    """(gdot - mu(s, g))^2 / (2 sigma(s, g)^2)."""
    sig = problem.model.sigma(g, s)
    mu = problem.drift.mu(problem.model, g, s)
    p = np.asarray(gdot) - mu
    out = p * p / (2.0 * sig * sig)
    return float(out) if np.ndim(out) == 0 else out


def _lagrangian_parts(problem, s, g, v):
    """L, dL/dg, dL/dv on arrays."""
    parts = problem.model.partials(g, s)
    sig, sx, _ = parts
    mu, mux, _ = problem.drift.mu_partials(problem.model, g, s, parts)
    inv2 = 1.0 / (sig * sig)
    p = v - mu
    L = 0.5 * p * p * inv2
    Lv = p * inv2
    Lg = -p * mux * inv2 - p * p * sx * inv2 / sig
    return L, Lg, Lv


def _acceleration(problem, s, g, v):
    model, drift = problem.model, problem.drift
    parts = model.partials(g, s)
    sig, sx, _ = parts
    mu, mux, mut = drift.mu_partials(model, g, s, parts)
    p = v - mu
    acc = mut + mu * mux + (sx / sig) * p * (p + 2.0 * mu)
    if model.time_dependent:
        st, _ = model.time_partials(g, s)
        acc = acc + 2.0 * (st / sig) * p
    return acc


def _integrate(problem, v0, n_grid, keep_path=False):
    """RK4 for (g, v) from (x, v0) on n_grid uniform nodes; v0 may be an array."""
    v = np.array(v0, dtype=float, copy=True)
    g = np.full_like(v, problem.x)
    s0 = problem.t
    h = problem.duration / (n_grid - 1)
    if keep_path:
        gs = np.empty((n_grid,) + v.shape)
        vs = np.empty_like(gs)
        gs[0], vs[0] = g, v
    with np.errstate(all="ignore"):
        for i in range(n_grid - 1):
            s = s0 + i * h
            k1g, k1v = v, _acceleration(problem, s, g, v)
            g2, v2 = g + 0.5 * h * k1g, v + 0.5 * h * k1v
            k2g, k2v = v2, _acceleration(problem, s + 0.5 * h, g2, v2)
            g3, v3 = g + 0.5 * h * k2g, v + 0.5 * h * k2v
            k3g, k3v = v3, _acceleration(problem, s + 0.5 * h, g3, v3)
            g4, v4 = g + h * k3g, v + h * k3v
            k4g, k4v = v4, _acceleration(problem, s + h, g4, v4)
            g = g + h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            if keep_path:
                gs[i + 1], vs[i + 1] = g, v
    if keep_path:
        return gs, vs
    return g, v


def _trapezoid_energy(problem, s, g, v):
    L = lagrangian(problem, s, g, v)
    h = s[1] - s[0]
    return float(h * (np.sum(L) - 0.5 * (L[0] + L[-1])))


def _start_velocities(problem):
    d = problem.duration
    slope = (problem.y - problem.x) / d
    mu0 = float(problem.drift.mu(problem.model, problem.x, problem.t))
    starts = [k * slope for k in MULTISTART_FACTORS] + [mu0, slope + mu0]
    uniq = []
    for v in starts:
        if not any(abs(v - w) <= 1e-12 * max(1.0, abs(w)) for w in uniq):
            uniq.append(v)
    return np.array(uniq)


def _newton_shoot(problem, starts, targets, n_grid, tol, max_iter=40):
    """Batched damped Newton (finite-difference slope) on F(v0) = g(u; v0) - target.

    ``targets`` and ``tol`` are per-trajectory arrays; all trajectories share
    the problem's model, drift, time interval and start point.
    """
    v = starts.astype(float).copy()
    m = len(v)
    converged = np.zeros(m, dtype=bool)
    alive = np.ones(m, dtype=bool)
    F = np.full(m, np.nan)
    step = np.zeros(m)
    for _ in range(max_iter):
        eps = 1e-6 * np.maximum(1.0, np.abs(v))
        batch = np.concatenate([v, v + eps])
        g_end, _ = _integrate(problem, batch, n_grid)
        Fn, Fe = g_end[:m] - targets, g_end[m:] - targets
        bad = ~np.isfinite(Fn) | (np.isfinite(F) & (np.abs(Fn) > np.abs(F)) & ~converged)
        # Damping: retreat half-way toward the previous iterate.
        retreat = bad & alive & (np.abs(step) > 1e-14 * np.maximum(1.0, np.abs(v)))
        if np.any(retreat):
            step[retreat] *= 0.5
            v[retreat] -= step[retreat]
        alive &= ~(bad & ~retreat)
        good = ~bad & alive
        F[good] = Fn[good]
        converged |= good & (np.abs(Fn) <= tol)
        work = good & ~converged
        if not np.any(work | (retreat & alive)):
            break
        slope = (Fe - Fn) / eps
        ok = work & np.isfinite(slope) & (slope != 0)
        new_step = np.zeros(m)
        new_step[ok] = -Fn[ok] / slope[ok]
        cap = 4.0 * np.maximum(1.0, np.abs(v))
        new_step = np.clip(new_step, -cap, cap)
        step = np.where(ok, new_step, step)
        v = np.where(ok, v + new_step, v)
        alive &= ~(work & ~ok)
    return v, converged, F


def _scan_bisect(problem, n_grid, tol, n_scan=64, max_iter=80):
    """Velocity scan for sign changes of F, then batched bisection."""
    d = problem.duration
    R = max(1.0, 4.0 * abs(problem.y - problem.x) / d) * 4.0
    vs = np.linspace(-R, R, n_scan)
    F = _integrate(problem, vs, n_grid)[0] - problem.y
    idx = np.where(np.isfinite(F[:-1]) & np.isfinite(F[1:]) & (np.sign(F[:-1]) != np.sign(F[1:])))[0]
    if len(idx) == 0:
        return np.array([])
    a, b = vs[idx], vs[idx + 1]
    fa = F[idx]
    for _ in range(max_iter):
        c = 0.5 * (a + b)
        fc = _integrate(problem, c, n_grid)[0] - problem.y
        left = np.sign(fc) == np.sign(fa)
        a = np.where(left, c, a)
        fa = np.where(left, fc, fa)
        b = np.where(left, b, c)
        if np.all(np.abs(fc) <= tol):
            break
    c = 0.5 * (a + b)
    fc = _integrate(problem, c, n_grid)[0] - problem.y
    return c[np.abs(fc) <= tol]


def _finish(problem, roots, starts, n_grid, stage):
    uniq = []
    for r in np.sort(roots):
        if not uniq or abs(r - uniq[-1]) > 1e-7 * max(1.0, abs(r)):
            uniq.append(r)
    uniq = np.array(uniq)
    gs, vs = _integrate(problem, uniq, n_grid, keep_path=True)
    s = np.linspace(problem.t, problem.u_time, n_grid)
    energies = [_trapezoid_energy(problem, s, gs[:, j], vs[:, j]) for j in range(len(uniq))]
    best = int(np.argmin(energies))
    path = gs[:, best]
    return EnergySolution(
        energy=energies[best],
        s=s,
        path=path,
        method="shooting",
        residual=float(abs(path[-1] - problem.y)),
        multistart_count=len(starts),
        n_stationary=len(uniq),
        initial_velocity=float(uniq[best]),
        diagnostics={"stage": stage, "stationary_energies": energies},
    )


def _solve_batch(problems, n_grid, multistarts=None, fallback=True):
    """Shoot several problems that share model, drift, t, u and x in one batch."""
    if n_grid < MIN_GRID:
        raise ValueError(f"n_grid must be >= {MIN_GRID}")
    base = problems[0]
    start_sets = []
    for p in problems:
        st = _start_velocities(p)
        if multistarts is not None:
            st = st[:max(1, multistarts)]
        start_sets.append(st)
    owner = np.concatenate([np.full(len(st), i) for i, st in enumerate(start_sets)])
    starts = np.concatenate(start_sets)
    targets = np.array([problems[i].y for i in owner])
    tol = 1e-10 * np.maximum(1.0, np.abs(targets - base.x))
    v, conv, F = _newton_shoot(base, starts, targets, n_grid, tol)

    out = []
    for i, p in enumerate(problems):
        mine = owner == i
        roots = v[mine & conv]
        stage = "newton"
        if len(roots) == 0:
            roots = _scan_bisect(p, n_grid, 1e-10 * max(1.0, abs(p.y - p.x)))
            stage = "scan-bisect"
        if len(roots) == 0:
            diag = {"starts": start_sets[i].tolist(), "final_mismatch": F[mine].tolist()}
            if not fallback:
                raise EnergySolverError(f"shooting failed to hit y={p.y}", diag)
            log.warning("shooting failed for y=%g; falling back to direct minimisation", p.y)
            sol = direct_minimize_energy(p, n_grid)
            sol.diagnostics.update(diag, shooting="failed")
            sol.multistart_count = len(start_sets[i])
            out.append(sol)
            continue
        out.append(_finish(p, roots, start_sets[i], n_grid, stage))
    return out


def solve_euler_lagrange(problem: EnergyProblem, n_grid: int = 512, multistarts: Optional[int] = None,
                         fallback: bool = True) -> EnergySolution:
    """Minimum-energy stationary path by shooting on the Euler-Lagrange equation.

    The ODE g'' = mu_s + mu mu_g + (sigma_g / sigma) p (p + 2 mu) + 2 (sigma_s / sigma) p,
    p = g' - mu, is integrated by fixed-step RK4 on ``n_grid`` nodes from each
    starting velocity k (y - x)/(u - t), k in {1/4, 1/2, 1, 2, 4}, plus mu(x)
    and the drift-corrected slope. ``multistarts`` keeps only the first few.
    Converged stationary paths are ranked by trapezoid energy and the
    cheapest is returned. When no start hits the target a velocity scan with
    bisection is tried, then (``fallback=True``) :func:`direct_minimize_energy`,
    flagged in ``method``.
    """
    return _solve_batch([problem], n_grid, multistarts, fallback)[0]


def discrete_energy(problem: EnergyProblem, path: np.ndarray) -> float:
    """Trapezoid energy of the piecewise-linear path through ``path`` nodes."""
    n = len(path)
    s = np.linspace(problem.t, problem.u_time, n)
    h = s[1] - s[0]
    v = np.diff(path) / h
    La = lagrangian(problem, s[:-1], path[:-1], v)
    Lb = lagrangian(problem, s[1:], path[1:], v)
    return float(0.5 * h * np.sum(La + Lb))


def _energy_and_grad(problem, s, path, h):
    v = np.diff(path) / h
    La, Lga, Lva = _lagrangian_parts(problem, s[:-1], path[:-1], v)
    Lb, Lgb, Lvb = _lagrangian_parts(problem, s[1:], path[1:], v)
    E = 0.5 * h * np.sum(La + Lb)
    seg = 0.5 * (Lva + Lvb)
    grad = 0.5 * h * (Lgb[:-1] + Lga[1:]) + seg[:-1] - seg[1:]
    return float(E), grad


def _preconditioner(problem, s, path, h):
    """Banded weighted Laplacian sum_i (g_{i+1}-g_i)^2 / (2 h sigma_i^2), interior nodes only."""
    mid = 0.5 * (path[:-1] + path[1:])
    sig = problem.model.sigma(mid, 0.5 * (s[:-1] + s[1:]))
    w = 1.0 / (h * sig * sig)
    diag = w[:-1] + w[1:]
    off = -w[1:-1]
    ab = np.zeros((2, len(diag)))
    ab[0, 1:] = off
    ab[1] = diag
    return ab


def direct_minimize_energy(problem: EnergyProblem, n_grid: int = 512, iterations: int = 500,
                           gtol: float = 1e-15, initial_path: Optional[np.ndarray] = None) -> EnergySolution:
    """Minimise the trapezoid energy over piecewise-linear paths with fixed endpoints.

    Descent direction is the gradient preconditioned by the weighted
    Laplacian of the kinetic term; step length by Armijo backtracking. The
    energy history is nonincreasing by construction.
    """
    if n_grid < MIN_GRID:
        raise ValueError(f"n_grid must be >= {MIN_GRID}")
    s = np.linspace(problem.t, problem.u_time, n_grid)
    h = s[1] - s[0]
    path = (np.linspace(problem.x, problem.y, n_grid) if initial_path is None
            else np.array(initial_path, dtype=float))
    path[0], path[-1] = problem.x, problem.y
    E, grad = _energy_and_grad(problem, s, path, h)
    history = [E]
    moves = []
    for it in range(iterations):
        ab = _preconditioner(problem, s, path, h)
        direction = -solveh_banded(ab, grad)
        slope = float(grad @ direction)
        if -slope <= gtol * max(1.0, E):
            break
        alpha = 1.0
        while True:
            trial = path.copy()
            trial[1:-1] += alpha * direction
            with np.errstate(all="ignore"):
                E_new, g_new = _energy_and_grad(problem, s, trial, h)
            if np.isfinite(E_new) and E_new <= E + ARMIJO * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                break
        if alpha < 1e-12:
            break
        moves.append(alpha * float(np.max(np.abs(direction))))
        path, E, grad = trial, E_new, g_new
        history.append(E)
    return EnergySolution(
        energy=E,
        s=s,
        path=path,
        method="direct-minimization",
        residual=0.0,
        multistart_count=0,
        history=history,
        diagnostics={"iterations": len(history) - 1, "max_moves": moves},
    )


def ns_bounds_check(problem: EnergyProblem, bounds: NsBounds, energy: float) -> NsCheck:
    """Two-sided a-priori bound on E in terms of the coefficient caps.

    |y-x|^2 / (8 lambda D) - Lambda D / 4  <  E  <  lambda |y-x|^2 / (2 D) + Lambda D / 2,
    with D = u - t.
    """
    D = problem.duration
    dy2 = (problem.y - problem.x) ** 2
    lower = dy2 / (8.0 * bounds.lambda_cap * D) - 0.25 * bounds.Lambda_cap * D
    upper = bounds.lambda_cap * dy2 / (2.0 * D) + 0.5 * bounds.Lambda_cap * D
    # closed interval: with Lambda = 0 and y = x both bounds collapse onto E = 0
    return NsCheck(lower <= energy <= upper, lower, upper, energy - lower, upper - energy)


@dataclass
class EnergyRow:
    y: float
    E: float
    half_d2: float
    method: str
    residual: float
    E_direct: float = math.nan
    ok: bool = True
    error: str = ""

    @property
    def rel_diff(self) -> float:
        return abs(self.E - self.E_direct) / max(1.0, abs(self.E))


def _curve_chunk(args):
    model, drift, t, u_time, x, ys, n_grid, cross_check = args
    rows = []
    problems = []
    for y in ys:
        half_d2 = 0.5 * geodesic_distance(model, x, y) ** 2
        rows.append(EnergyRow(y, math.nan, half_d2, "failed", math.nan, ok=False))
        problems.append(EnergyProblem(t, u_time, x, y, model, drift))
    try:
        sols = _solve_batch(problems, n_grid)
    except Exception as exc:  # batch trouble: retry row by row so failures stay local
        sols = []
        for p in problems:
            try:
                sols.append(solve_euler_lagrange(p, n_grid))
            except Exception as row_exc:
                sols.append(row_exc)
        log.debug("batched shooting failed (%s); solved rows individually", exc)
    for row, prob, sol in zip(rows, problems, sols):
        if isinstance(sol, Exception):
            row.error = str(sol)
            continue
        row.E, row.method, row.residual, row.ok = sol.energy, sol.method, sol.residual, True
        if cross_check:
            row.E_direct = direct_minimize_energy(prob, n_grid).energy
    return rows


def energy_curve(model: VolModel, drift: DriftSpec, t: float, u_time: float, x: float,
                 y_grid: Sequence[float], n_grid: int = 512, cross_check: bool = False,
                 workers: int = 1) -> List[EnergyRow]:
    """Rows (y, E, d^2(x, y)/2, ...) in the order of ``y_grid``.

    All rows share the start point, so their shooting runs as one vectorised
    batch per worker. ``workers > 1`` splits the grid into contiguous chunks
    for a process pool; row order is preserved.
    """
    ys = [float(y) for y in y_grid]
    if workers <= 1 or len(ys) < 2 * workers:
        return _curve_chunk((model, drift, t, u_time, x, ys, n_grid, cross_check))
    chunks = np.array_split(np.arange(len(ys)), workers)
    jobs = [(model, drift, t, u_time, x, [ys[i] for i in c], n_grid, cross_check) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [row for chunk in pool.map(_curve_chunk, jobs) for row in chunk]
