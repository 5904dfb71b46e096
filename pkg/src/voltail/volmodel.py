"""Volatility functions, their derivatives and bounds, and divergence-form drifts.

A :class:`VolModel` is an immutable description of sigma(x) (or sigma(t, x)).
Everything downstream asks it for values and partial derivatives through
:meth:`VolModel.partials`, which returns sigma and its first two x-derivatives
in one vectorised call; time derivatives are only non-zero for expression
models that mention ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import expr as _expr

KINDS = ("constant", "local-dip", "cev-local", "expression")
KIND_ALIASES = {"paper-figure-1": "local-dip", "figure-1": "local-dip", "user-expression": "expression"}

LOCAL_DIP_EXPR = "0.5 - 0.1*exp(1 - x^2) + 0.4*exp(-2*exp(x))"

# Sampling grid used to estimate / verify bounds.
BOUND_GRID_POINTS = 10_000
DEFAULT_EXPR_DOMAIN = (-10.0, 10.0)
DEFAULT_CEV_XMAX = 100.0


class DomainError(ValueError):
    pass


class BoundsError(ValueError):
    pass


@dataclass(frozen=True)
class VolModel:
    """Immutable one-dimensional volatility specification.

    Use the constructors :meth:`constant`, :meth:`local_dip`,
    :meth:`cev_local` and :meth:`from_expression` rather than the raw
    initialiser.
    """

    kind: str
    sigma_lo: float
    sigma_hi: float
    sigma0: float = 0.0
    delta: float = 0.0
    beta: float = 0.0
    expression: Optional[str] = None
    derivative_mode: str = "analytic"
    fd_step: Optional[float] = None
    domain: Tuple[float, float] = (-math.inf, math.inf)

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, sigma0: float, **kw) -> "VolModel":
        if not sigma0 > 0:
            raise BoundsError(f"constant volatility must be positive, got {sigma0}")
        return cls(kind="constant", sigma_lo=sigma0, sigma_hi=sigma0, sigma0=float(sigma0), **kw)

    @classmethod
    def local_dip(cls, **kw) -> "VolModel":
        """sigma(x) = 1/2 - 0.1 exp(1 - x^2) + 0.4 exp(-2 e^x).

        Tends to 0.9 as x -> -inf and 0.5 as x -> +inf with a dip just right
        of the origin. The supremum 0.9 is never attained.
        """
        res = minimize_scalar(_dip_sigma, bounds=(-1.0, 2.0), method="bounded",
                              options={"xatol": 1e-12})
        lo = float(min(res.fun, _dip_sigma(np.linspace(-40, 40, 200_001)).min()))
        return cls(kind="local-dip", sigma_lo=lo, sigma_hi=0.9, **kw)

    @classmethod
    def cev_local(cls, delta: float, beta: float, x_max: float = DEFAULT_CEV_XMAX, **kw) -> "VolModel":
        """Level-dependent CEV coefficient sigma(x) = delta * x**(1 + beta) on (0, x_max].

        The bounds are the inf/sup over the declared domain; the infimum is 0
        when 1 + beta > 0, so this kind is not uniformly elliptic.
        """
        if not delta > 0:
            raise BoundsError("delta must be positive")
        p = 1.0 + beta
        edge = delta * x_max ** p
        if p > 0:
            lo, hi = 0.0, edge
        elif p < 0:
            lo, hi = edge, math.inf
        else:
            lo = hi = delta
        return cls(kind="cev-local", sigma_lo=lo, sigma_hi=hi, delta=float(delta), beta=float(beta),
                   domain=(0.0, x_max), **kw)

    @classmethod
    def from_expression(
        cls,
        expression: str,
        sigma_lo: Optional[float] = None,
        sigma_hi: Optional[float] = None,
        confirm_bounds: bool = False,
        domain: Tuple[float, float] = DEFAULT_EXPR_DOMAIN,
        **kw,
    ) -> "VolModel":
        """Volatility from an expression string in ``x`` (and optionally ``t``).

        Bounds are estimated on a dense grid over ``domain`` (at t = 0). When
        they are not given explicitly the caller must pass
        ``confirm_bounds=True`` to accept the estimate.
        """
        tree = _expr.parse(expression)
        grid = np.linspace(domain[0], domain[1], BOUND_GRID_POINTS)
        vals = np.asarray(tree.evaluate(grid, 0.0), dtype=float) * np.ones_like(grid)
        if not np.all(np.isfinite(vals)):
            raise BoundsError(f"sigma is not finite on {domain}")
        est_lo, est_hi = float(vals.min()), float(vals.max())
        if est_lo <= 0:
            raise BoundsError(f"sigma must be positive; grid minimum is {est_lo:.6g}")
        if sigma_lo is None or sigma_hi is None:
            if not confirm_bounds:
                raise BoundsError(
                    f"estimated bounds [{est_lo:.12g}, {est_hi:.12g}] on {domain} "
                    "must be confirmed (confirm_bounds=True) or given explicitly"
                )
            sigma_lo = est_lo if sigma_lo is None else sigma_lo
            sigma_hi = est_hi if sigma_hi is None else sigma_hi
        elif est_lo < sigma_lo * (1 - 1e-9) or est_hi > sigma_hi * (1 + 1e-9):
            raise BoundsError(
                f"sampled sigma range [{est_lo:.6g}, {est_hi:.6g}] violates declared "
                f"bounds [{sigma_lo:.6g}, {sigma_hi:.6g}]"
            )
        return cls(kind="expression", sigma_lo=float(sigma_lo), sigma_hi=float(sigma_hi),
                   expression=expression, domain=domain, **kw)

    @classmethod
    def from_kind(cls, kind: str, **params) -> "VolModel":
        kind = KIND_ALIASES.get(kind, kind)
        if kind == "constant":
            return cls.constant(params.pop("sigma0"), **params)
        if kind == "local-dip":
            return cls.local_dip(**params)
        if kind == "cev-local":
            return cls.cev_local(params.pop("delta"), params.pop("beta"), **params)
        if kind == "expression":
            return cls.from_expression(params.pop("expression"), **params)
        raise ValueError(f"unknown volatility kind {kind!r}; expected one of {KINDS}")

    def with_central_differences(self, h: Optional[float] = None) -> "VolModel":
        return _replace(self, derivative_mode="central-difference", fd_step=h)

    # -- evaluation -------------------------------------------------------

    @property
    def time_dependent(self) -> bool:
        return self.kind == "expression" and self._tree.depends_on("t")

    @cached_property
    def _tree(self):
        return _expr.parse(self.expression) if self.kind == "expression" else None

    @cached_property
    def _tree_derivs(self):
        s = self._tree
        sx = s.diff("x")
        return {
            "x": sx,
            "xx": sx.diff("x"),
            "t": s.diff("t"),
            "xt": sx.diff("t"),
        }

    def _check_domain(self, x):
        if self.kind == "cev-local" and np.any(np.asarray(x) <= 0):
            raise DomainError("cev-local volatility is defined for x > 0 only")

    def sigma(self, x, t=0.0):
        self._check_domain(x)
        return self._analytic(x, t, "")

    def _analytic(self, x, t, which: str):
        k = self.kind
        if k == "constant":
            return self.sigma0 + 0.0 * np.asarray(x, dtype=float) if not which else 0.0 * np.asarray(x, dtype=float)
        if k == "local-dip":
            if which in ("t", "xt"):
                return 0.0 * np.asarray(x, dtype=float)
            return _dip(x, which)
        if k == "cev-local":
            if which in ("t", "xt"):
                return 0.0 * np.asarray(x, dtype=float)
            p = 1.0 + self.beta
            if which == "":
                return self.delta * np.power(x, p)
            if which == "x":
                return self.delta * p * np.power(x, p - 1.0)
            return self.delta * p * (p - 1.0) * np.power(x, p - 2.0)
        node = self._tree if not which else self._tree_derivs[which]
        return np.asarray(node.evaluate(x, t), dtype=float) * np.ones_like(np.asarray(x, dtype=float))

    def _step(self, x, scale):
        base = self.fd_step if self.fd_step is not None else scale
        return base * np.maximum(1.0, np.abs(x))

    def partials(self, x, t=0.0):
        """Return (sigma, d sigma/dx, d^2 sigma/dx^2) at x."""
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        if self.derivative_mode == "analytic":
            if self.kind == "local-dip":
                return _dip_partials(x)
            return self._analytic(x, t, ""), self._analytic(x, t, "x"), self._analytic(x, t, "xx")
        s = self._analytic(x, t, "")
        h = self._step(x, 1e-5)
        sx = (self._analytic(x + h, t, "") - self._analytic(x - h, t, "")) / (2 * h)
        # Second difference needs a larger step to keep rounding error ~1e-8.
        h2 = self._step(x, 1e-4) if self.fd_step is None else h
        sxx = (self._analytic(x + h2, t, "") - 2 * s + self._analytic(x - h2, t, "")) / (h2 * h2)
        return s, sx, sxx

    def time_partials(self, x, t=0.0):
        """Return (d sigma/dt, d^2 sigma/dx dt); zero for time-homogeneous kinds."""
        x = np.asarray(x, dtype=float)
        if not self.time_dependent:
            z = 0.0 * x
            return z, z
        if self.derivative_mode == "analytic":
            return self._analytic(x, t, "t"), self._analytic(x, t, "xt")
        h = 1e-5 * max(1.0, abs(t))
        sp, spx, _ = _replace(self, derivative_mode="analytic").partials(x, t + h)
        sm, smx, _ = _replace(self, derivative_mode="analytic").partials(x, t - h)
        return (sp - sm) / (2 * h), (spx - smx) / (2 * h)

    def dsigma(self, x, t=0.0):
        return self.partials(x, t)[1]

    def describe(self) -> dict:
        d = {"kind": self.kind, "sigma_lo": self.sigma_lo, "sigma_hi": self.sigma_hi,
             "derivative_mode": self.derivative_mode}
        if self.kind == "constant":
            d["sigma0"] = self.sigma0
        elif self.kind == "cev-local":
            d.update(delta=self.delta, beta=self.beta)
        elif self.kind == "expression":
            d["expression"] = self.expression
        return d


def _replace(model: VolModel, **changes) -> VolModel:
    from dataclasses import replace
    return replace(model, **changes)


def _dip_sigma(x):
    return 0.5 - 0.1 * np.exp(1.0 - x * x) + 0.4 * np.exp(-2.0 * np.exp(x))


def _dip_partials(x):
    a = np.exp(1.0 - x * x)
    ex = np.exp(x)
    b = np.exp(-2.0 * ex)
    exb = ex * b
    return (0.5 - 0.1 * a + 0.4 * b,
            0.2 * x * a - 0.8 * exb,
            0.2 * a * (1.0 - 2.0 * x * x) - 0.8 * exb * (1.0 - 2.0 * ex))


def _dip(x, which):
    x = np.asarray(x, dtype=float)
    a = np.exp(1.0 - x * x)
    ex = np.exp(x)
    b = np.exp(-2.0 * ex)
    if which == "":
        return 0.5 - 0.1 * a + 0.4 * b
    if which == "x":
        return 0.2 * x * a - 0.8 * ex * b
    return 0.2 * a * (1.0 - 2.0 * x * x) - 0.8 * ex * b * (1.0 - 2.0 * ex)


@dataclass(frozen=True)
class DriftSpec:
    """Drift of the divergence-form operator, mu = a (b - b_hat) with a = sigma^2 / 2.

    ``derivation="driftless-log-stock"`` gives mu = -sigma^2/2 - sigma sigma',
    the value forced when the process is the log of a driftless stock.
    ``derivation="explicit"`` takes mu from an expression in x (and t).
    """

    derivation: str = "driftless-log-stock"
    expression: Optional[str] = None
    _tree: Optional[object] = field(default=None, compare=False, repr=False)

    @classmethod
    def driftless_log_stock(cls) -> "DriftSpec":
        return cls("driftless-log-stock")

    @classmethod
    def explicit(cls, expression) -> "DriftSpec":
        if not isinstance(expression, str):
            expression = repr(float(expression))
        return cls("explicit", expression, _expr.parse(expression))

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls.explicit("0")

    def _nodes(self):
        tree = self._tree or _expr.parse(self.expression)
        return tree, tree.diff("x"), tree.diff("t")

    def mu(self, model: VolModel, x, t=0.0):
        return self.mu_partials(model, x, t)[0]

    def mu_partials(self, model: VolModel, x, t=0.0, partials=None):
        """Return (mu, d mu/dx, d mu/dt); ``partials`` may carry model.partials(x, t)."""
        x = np.asarray(x, dtype=float)
        if self.derivation == "driftless-log-stock":
            s, sx, sxx = model.partials(x, t) if partials is None else partials
            mu = -0.5 * s * s - s * sx
            mux = -s * sx - sx * sx - s * sxx
            if not model.time_dependent:
                return mu, mux, 0.0 * mu
            st, sxt = model.time_partials(x, t)
            mut = -s * st - st * sx - s * sxt
            return mu, mux, mut
        if self.derivation != "explicit":
            raise ValueError(f"unknown drift derivation {self.derivation!r}")
        f, fx, ft = self._nodes()
        ones = np.ones_like(x)
        return (np.asarray(f.evaluate(x, t)) * ones, np.asarray(fx.evaluate(x, t)) * ones,
                np.asarray(ft.evaluate(x, t)) * ones)

    def sde_drift(self, model: VolModel, x, t=0.0):
        """Drift of the Ito SDE with generator a d^2 + (a' + mu) d, i.e. mu + sigma sigma'."""
        s, sx, _ = model.partials(x, t)
        if self.derivation == "driftless-log-stock":
            return -0.5 * s * s
        return self.mu(model, x, t) + s * sx

    def sde_coefficients(self, model: VolModel, x, t=0.0):
        """(drift, sigma) of the Ito SDE, sharing one sigma evaluation where possible."""
        if self.derivation == "driftless-log-stock":
            s = model.sigma(x, t)
            return -0.5 * s * s, s
        s, sx, _ = model.partials(x, t)
        return self.mu(model, x, t) + s * sx, s

    def describe(self) -> dict:
        d = {"derivation": self.derivation}
        if self.expression is not None:
            d["expression"] = self.expression
        return d


def eval_sigma(model: VolModel, x: float, t: Optional[float] = None) -> float:
    """sigma(x) (or sigma(t, x)); raises :class:`DomainError` outside the domain."""
    val = model.sigma(x, 0.0 if t is None else t)
    return float(val) if np.ndim(val) == 0 else val


def drift_mu(model: VolModel, x: float, t: float = 0.0) -> float:
    """Divergence-form drift -sigma^2/2 - sigma sigma' of the driftless log-stock."""
    val = DriftSpec.driftless_log_stock().mu(model, x, t)
    return float(val) if np.ndim(val) == 0 else val
