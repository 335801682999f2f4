"""Bubble integrals and the coefficient set of the reduced flow."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate, special

from .errors import UsageError

SUPPORTED_N = (3, 4, 5)
KINDS = ("c1", "c2", "c3", "b1")
GAMMA_BITS = 46


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return 2.0 * np.pi ** (n / 2) / special.gamma(n / 2)


def _radial_integrand(kind: str, n: int):
    if kind == "c1":
        return lambda r: r ** (n - 1) / (1 + r * r) ** n
    if kind == "b1":
        return lambda r: r ** (n - 1) / (1 + r * r) ** ((n + 2) / 2)
    if kind == "c2":
        return lambda r: (n - 2) ** 2 / 4 * r ** (n - 1) * (r * r - 1) ** 2 / (1 + r * r) ** (n + 2)
    if kind == "c3":
        return lambda r: (n - 2) ** 2 / n * r ** (n + 1) / (1 + r * r) ** (n + 2)
    raise UsageError(f"unknown constant {kind!r}; expected one of {KINDS}")


def _check(kind, n):
    if kind not in KINDS:
        raise UsageError(f"unknown constant {kind!r}; expected one of {KINDS}")
    if n not in SUPPORTED_N:
        raise UsageError(f"dimension n={n} unsupported; expected one of {SUPPORTED_N}")


class Quadrature(NamedTuple):
    value: float
    abserr: float


def bubble_constant_with_error(kind: str, n: int, limit: int = 200) -> Quadrature:
    """Adaptive quadrature of the radial reduction, split at r=1."""
    _check(kind, n)
    f = _radial_integrand(kind, n)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=limit)
    v1, e1 = integrate.quad(f, 0.0, 1.0, **opts)
    v2, e2 = integrate.quad(f, 1.0, np.inf, **opts)
    s = sphere_area(n)
    return Quadrature(s * (v1 + v2), s * (e1 + e2))


def bubble_constant(kind: str, n: int) -> float:
    return bubble_constant_with_error(kind, n).value


def radial_moment(k: float, p: float, n: int) -> float:
    """Closed form of the integral over R^n of r^k / (1 + r^2)^p via the Beta function."""
    s = (n + k) / 2
    if not (s > 0 and p - s > 0):
        raise UsageError(f"moment r^{k}/(1+r^2)^{p} diverges in dimension {n}")
    return sphere_area(n) * 0.5 * special.beta(s, p - s)


def bubble_constant_beta(kind: str, n: int) -> float:
    """Independent closed-form evaluation used to cross-check the quadrature."""
    _check(kind, n)
    if kind == "c1":
        return radial_moment(0, n, n)
    if kind == "b1":
        return radial_moment(0, (n + 2) / 2, n)
    if kind == "c2":
        q = n + 2
        return (n - 2) ** 2 / 4 * (radial_moment(4, q, n) - 2 * radial_moment(2, q, n)
                                   + radial_moment(0, q, n))
    return (n - 2) ** 2 / n * radial_moment(2, n + 2, n)


@dataclass(frozen=True)
class CoefficientSet:
    """Aggregated coefficients of the reduced flow.

    Only ratios of the testing constants enter the dynamics, so each gamma
    is a single aggregated positive number. ``gamma3 == 3 * gamma2`` is
    enforced; gamma2 is rounded to GAMMA_BITS significant bits so that
    gamma3 and the small integer combinations of the two are exact in
    binary floating point. ``kappa_fn`` is an optional slow time dependence of kappa,
    off by default.
    """

    n: int
    c1: float
    c2: float
    c3: float
    b1: float
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 3.0
    gamma4: float = 1.0
    gamma_nabla_lap: float = 1.0
    b_lambda: float = 1.0
    b_a: float = 1.0
    kappa: float = 0.0
    kappa_fn: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("n", "kappa_fn"):
                continue
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise UsageError(f"coefficient {f.name} must be positive, got {v}")
        g2 = _short_mantissa(self.gamma2)
        if self.gamma3 not in (3.0 * self.gamma2, 3.0 * g2):
            raise UsageError(
                f"constraint gamma3 = 3*gamma2 violated: gamma3={self.gamma3}, "
                f"gamma2={self.gamma2}")
        object.__setattr__(self, "gamma2", g2)
        object.__setattr__(self, "gamma3", 3.0 * g2)

    @property
    def A(self) -> float:
        """Scalar 4n(n-1)."""
        return 4.0 * self.n * (self.n - 1)

    def kappa_at(self, t: float) -> float:
        return self.kappa if self.kappa_fn is None else float(self.kappa_fn(t))

    def c(self, k: int) -> float:
        return (self.c1, self.c2, self.c3)[k - 1]


def _short_mantissa(x: float, bits: int = GAMMA_BITS) -> float:
    m, e = math.frexp(float(x))
    return math.ldexp(round(m * 2.0**bits), e - bits)


_TUNABLE = ("gamma1", "gamma2", "gamma3", "gamma4", "gamma_nabla_lap",
            "b_lambda", "b_a", "kappa")


def make_coefficients(n: int = 5, overrides: Optional[dict] = None) -> CoefficientSet:
    """Defaults plus validated overrides.

    gamma3 follows gamma2; an explicit gamma3 is accepted only if it equals
    3 * gamma2.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(_TUNABLE) - {"kappa_fn"}
    if unknown:
        raise UsageError(f"unknown coefficient override(s): {sorted(unknown)}")
    for k, v in overrides.items():
        if k != "kappa_fn" and not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
            raise UsageError(f"override {k} must be a positive number, got {v!r}")
    consts = {k: bubble_constant(k, n) for k in KINDS}
    gamma2 = float(overrides.get("gamma2", 1.0))
    if "gamma3" in overrides and float(overrides["gamma3"]) not in (
            3.0 * gamma2, 3.0 * _short_mantissa(gamma2)):
        raise UsageError(
            f"constraint gamma3 = 3*gamma2 violated by override gamma3={overrides['gamma3']} "
            f"(gamma2={gamma2})")
    vals = dict(gamma1=1.0, gamma4=1.0, gamma_nabla_lap=1.0, b_lambda=1.0, b_a=1.0,
                kappa=4.0 * n * (n - 1) * consts["c1"] ** (2.0 / n))
    vals.update({k: float(v) for k, v in overrides.items() if k not in ("gamma3", "kappa_fn")})
    vals["gamma2"] = gamma2
    vals["gamma3"] = 3.0 * _short_mantissa(gamma2)
    return CoefficientSet(n=n, **consts, **vals, kappa_fn=overrides.get("kappa_fn"))
