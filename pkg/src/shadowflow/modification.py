"""Cut-off profiles and the compactifying drift added to the center equation.

The default rising profile eta2 is a quintic smoothstep in the variable
u = log2(t), so eta2 = 0 on (0, 1] and eta2 = 1 on [2, inf). In this
variable the weight theta(t) = eta2 + eta2'(t) t ln t becomes the polynomial
S(u) + u S'(u), which peaks at 1.78 and keeps the quasi-monotonicity
constant below 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .coefficients import CoefficientSet
from .curvature import CurvatureField
from .dynamics import SLAVED, StateDerivative, rhs_zero_weak_limit
from .errors import DomainError, UsageError
from .interaction import BubbleState, GreenKernelModel

LN2 = np.log(2.0)


def smoothstep(u):
    """C^2 quintic step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _smoothstep_d1(u):
    inside = (u > 0) & (u < 1)
    return np.where(inside, 30.0 * u**2 * (1.0 - u) ** 2, 0.0)


def _smoothstep_d2(u):
    inside = (u > 0) & (u < 1)
    return np.where(inside, 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u), 0.0)


def eta1(t):
    """Falling cut-off: 1 on (0, 1], 0 on [2, inf)."""
    return 1.0 - smoothstep(np.asarray(t, dtype=float) - 1.0)


def eta2(t):
    """Rising cut-off: 0 on (0, 1], 1 on [2, inf)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        u = np.where(t > 0, np.log(np.maximum(t, 1e-300)) / LN2, -np.inf)
    return smoothstep(u)


def eta2_d1(t):
    t = np.asarray(t, dtype=float)
    u = np.log(np.maximum(t, 1e-300)) / LN2
    return _smoothstep_d1(u) / (np.maximum(t, 1e-300) * LN2)


def eta2_d2(t):
    t = np.asarray(t, dtype=float)
    tt = np.maximum(t, 1e-300)
    u = np.log(tt) / LN2
    return (_smoothstep_d2(u) / LN2 - _smoothstep_d1(u)) / (tt**2 * LN2)


def convexity_window() -> float:
    """Largest delta with eta2'' >= 0 on (1, 1 + delta)."""
    f = lambda u: _smoothstep_d2(u) / LN2 - _smoothstep_d1(u)
    u_star = brentq(f, 1e-6, 0.5)
    return 2.0 ** u_star - 1.0


@dataclass(frozen=True)
class ModificationConfig:
    """Parameters of the compactifying drift.

    ``eps_strength`` scales the drift, ``eps_inner`` is the threshold of the
    lambda|a|^2 cut-off and ``a_radius`` the radius of the |a| cut-off
    (defaults to eps_strength / 2).
    """

    eps_strength: float = 0.1
    eps_inner: float = 0.005
    a_radius: Optional[float] = None
    eta1: Callable = eta1
    eta2: Callable = eta2
    delta_plateau: float = field(default_factory=convexity_window)

    def __post_init__(self):
        for name in ("eps_strength", "eps_inner"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise UsageError(f"{name} must be positive, got {v}")
        if self.a_radius is None:
            object.__setattr__(self, "a_radius", self.eps_strength / 2)
        elif not self.a_radius > 0:
            raise UsageError(f"a_radius must be positive, got {self.a_radius}")
        if self.eps_inner >= self.eps_strength:
            raise UsageError("eps_inner must be much smaller than eps_strength")


class Cutoffs(NamedTuple):
    eta_a: float
    eta_alam: float


def cutoffs(state: BubbleState, mconf: ModificationConfig, i: int) -> Cutoffs:
    a = state.a[i]
    r2 = float(a @ a)
    lam = float(np.exp(state.log_lambda[i]))
    eta_a = float(mconf.eta1(np.sqrt(r2) / mconf.a_radius))
    eta_alam = float(mconf.eta2(lam * r2 / mconf.eps_inner))
    return Cutoffs(eta_a, eta_alam)


def drift(state: BubbleState, coeffs: CoefficientSet, mconf: ModificationConfig) -> np.ndarray:
    """Extra center velocity a' (shape (p, n)), pointing to x0."""
    out = np.zeros_like(state.a)
    lam = state.lam
    for i in range(state.p):
        a = state.a[i]
        r = float(np.sqrt(a @ a))
        if r == 0.0:
            continue
        c = cutoffs(state, mconf, i)
        w = c.eta_a * c.eta_alam
        if w == 0.0:
            continue
        out[i] = -coeffs.kappa * coeffs.gamma4 * mconf.eps_strength * w * (a / r) / lam[i] ** 2
    return out


def rhs_modified(state: BubbleState, field: CurvatureField, kernel: GreenKernelModel,
                 coeffs: CoefficientSet, mconf: ModificationConfig,
                 alpha_mode: str = SLAVED) -> StateDerivative:
    base = rhs_zero_weak_limit(state, field, kernel, coeffs, alpha_mode)
    return StateDerivative(base.dlog_alpha, base.dlog_lambda, base.da + drift(state, coeffs, mconf))


def vartheta(mconf: Optional[ModificationConfig], t) -> np.ndarray:
    """Weight eta(t) + eta'(t) t ln t of the cut-off profile."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("vartheta needs t > 0")
    prof = eta2 if mconf is None else mconf.eta2
    if prof is eta2:
        out = eta2(t) + eta2_d1(t) * t * np.log(t)
    else:
        h = 1e-6 * t
        d1 = (prof(t + h) - prof(t - h)) / (2 * h)
        out = prof(t) + d1 * t * np.log(t)
    return out if out.ndim else float(out)


class KappaStar(NamedTuple):
    kappa: float
    r: float
    s: float


def measure_kappa_star(mconf: Optional[ModificationConfig] = None,
                       t_min: float = 0.5, t_max: float = 4.0,
                       n_grid: int = 200001) -> KappaStar:
    """Smallest kappa with vartheta(r) <= kappa vartheta(s) for grid points r < s."""
    t = np.geomspace(t_min, t_max, n_grid)
    v = vartheta(mconf, t)
    run_max = np.maximum.accumulate(v)
    arg_max = np.zeros(n_grid, dtype=int)
    best = 0
    for k in range(n_grid):
        if v[k] > v[best]:
            best = k
        arg_max[k] = best
    pos = v > 0
    ratio = np.where(pos, run_max / np.where(pos, v, 1.0), 1.0)
    if np.any(~pos & (run_max > 0)):
        return KappaStar(np.inf, np.nan, np.nan)
    k = int(np.argmax(ratio))
    return KappaStar(max(1.0, float(ratio[k])), float(t[arg_max[k]]), float(t[k]))
