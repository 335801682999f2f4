"""Analytic curvature model K with an exact third-order jet.

Near the maximum x0 = 0 the field is exactly ``1 - |x|^4``. Extra critical
points are placed with compactly supported polynomial bumps

    B(x) = A * (1 - |x - c|^2 / w^2)^m      for |x - c| < w,

whose derivatives are closed form, so no quadrature enters the hot loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, UsageError

BUMP_POWER = 6  # C^5 profile, enough for a C^2 Laplacian jet


@dataclass(frozen=True)
class Bump:
    center: np.ndarray
    amplitude: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.width <= 0:
            raise UsageError(f"bump width must be positive, got {self.width}")


class Jet(NamedTuple):
    K: float
    gradK: np.ndarray
    lapK: float
    gradLapK: np.ndarray


@dataclass(frozen=True)
class CurvatureField:
    """K(x) = 1 - |x|^4 + sum of bumps, on the chart ball of radius ``chart_radius``."""

    n: int = 5
    bumps: tuple = ()
    chart_radius: float = 1.0
    quartic_form: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise UsageError(f"dimension must be >= 1, got {self.n}")
        bumps = tuple(b if isinstance(b, Bump) else Bump(**b) for b in self.bumps)
        for b in bumps:
            if b.center.shape != (self.n,):
                raise UsageError(
                    f"bump center has shape {b.center.shape}, expected ({self.n},)")
        object.__setattr__(self, "bumps", bumps)

    @property
    def max_point(self) -> np.ndarray:
        return np.zeros(self.n)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise UsageError(f"point has shape {x.shape}, expected ({self.n},)")
        r = np.sqrt(x @ x)
        if not np.isfinite(r) or r > self.chart_radius * (1 + 1e-12):
            raise DomainError(f"|x| = {r:.6g} outside chart of radius {self.chart_radius}")
        return x

    def value(self, x) -> float:
        return self.jet(x).K

    def jet(self, x) -> Jet:
        return eval_jet(self, x)

    def hessian(self, x) -> np.ndarray:
        x = self._check(x)
        n = self.n
        r2 = x @ x
        H = -4.0 * (r2 * np.eye(n) + 2.0 * np.outer(x, x))
        m = BUMP_POWER
        for b in self.bumps:
            d = x - b.center
            s = 1.0 - (d @ d) / b.width**2
            if s <= 0.0:
                continue
            w2 = b.width**2
            H += (-2.0 * m * b.amplitude / w2) * (
                s ** (m - 1) * np.eye(n) - 2.0 * (m - 1) * s ** (m - 2) / w2 * np.outer(d, d))
        return H


def eval_jet(field: CurvatureField, x) -> Jet:
    """Return (K, grad K, Laplacian K, grad Laplacian K) at ``x``."""
    x = field._check(x)
    n = field.n
    r2 = float(x @ x)
    K = 1.0 - r2 * r2
    gradK = -4.0 * r2 * x
    lapK = -4.0 * (n + 2) * r2
    gradLapK = -8.0 * (n + 2) * x
    m = BUMP_POWER
    for b in field.bumps:
        d = x - b.center
        w2 = b.width**2
        s = 1.0 - float(d @ d) / w2
        if s <= 0.0:
            continue
        A = b.amplitude
        K += A * s**m
        gradK = gradK - (2.0 * m * A / w2) * s ** (m - 1) * d
        c = -2.0 * m * A / w2
        lapK += c * ((n + 2 * m - 2) * s ** (m - 1) - 2 * (m - 1) * s ** (m - 2))
        dlap_ds = c * ((n + 2 * m - 2) * (m - 1) * s ** (m - 2)
                       - 2 * (m - 1) * (m - 2) * s ** (m - 3))
        gradLapK = gradLapK + dlap_ds * (-2.0 / w2) * d
    return Jet(float(K), gradK, float(lapK), gradLapK)


@dataclass
class CriticalPoint:
    x: np.ndarray
    K: float
    lapK: float
    is_max_point: bool


@dataclass
class ValidationReport:
    valid: bool
    critical_points: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def q(self) -> int:
        """Number of critical points other than x0."""
        return sum(not cp.is_max_point for cp in self.critical_points)


def _newton_critical(field: CurvatureField, x0, tol=1e-12, max_iter=200):
    """Damped Newton on grad K; returns (x, converged)."""
    x = np.array(x0, dtype=float)
    R = field.chart_radius
    g = eval_jet(field, x).gradK
    for _ in range(max_iter):
        gn = np.linalg.norm(g)
        if gn < tol:
            return x, True
        H = field.hessian(x)
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        t = 1.0
        while t > 1e-10:
            trial = x + t * step
            if np.linalg.norm(trial) <= R:
                gt = eval_jet(field, trial).gradK
                if np.linalg.norm(gt) < gn:
                    break
            t *= 0.5
        else:
            return x, False
        x, g = trial, gt
    return x, np.linalg.norm(g) < tol


def _seeds(field: CurvatureField, rng):
    seeds = []
    for b in field.bumps:
        c = b.center
        nc = np.linalg.norm(c)
        dirs = [c / nc, -c / nc] if nc > 0 else []
        dirs += [v / np.linalg.norm(v) for v in rng.standard_normal((6, field.n))]
        seeds.append(c.copy())
        for u in dirs:
            for t in (0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.95):
                seeds.append(c + t * b.width * u)
    R = field.chart_radius
    return [s for s in seeds if np.linalg.norm(s) < R]


def validate_condition(field: CurvatureField, *, n_samples: int = 20000,
                       seed: int = 0) -> ValidationReport:
    """Locate critical points and check the required sign pattern.

    The maximum x0 = 0 must be the unique global maximum with the quartic
    form intact, every other critical point must have positive Laplacian,
    and K must be positive on the chart (checked by sampling).
    """
    rng = np.random.default_rng(seed)
    report = ValidationReport(valid=True)
    n = field.n
    R = field.chart_radius

    for i, b in enumerate(field.bumps):
        if np.linalg.norm(b.center) - b.width <= 0.0:
            report.violations.append(f"bump {i} support reaches x0; quartic form broken")

    found = [CriticalPoint(np.zeros(n), 1.0, 0.0, True)]
    for s in _seeds(field, rng):
        x, ok = _newton_critical(field, s)
        if not ok:
            report.diagnostics.append(f"Newton did not converge from seed {np.round(s, 4)}")
            continue
        # outside every bump support grad K = -4|x|^2 x vanishes only at x0
        if not any(np.linalg.norm(x - b.center) < b.width for b in field.bumps):
            continue
        if any(np.linalg.norm(x - cp.x) < 1e-7 for cp in found):
            continue
        j = eval_jet(field, x)
        found.append(CriticalPoint(x, j.K, j.lapK, False))
    report.critical_points = found

    for k, cp in enumerate(found[1:], start=1):
        if cp.lapK <= 0.0:
            report.violations.append(
                f"critical point x_{k}={np.round(cp.x, 6).tolist()} has lapK={cp.lapK:.6g} <= 0")
        if cp.K >= 1.0:
            report.violations.append(
                f"critical point x_{k} has K={cp.K:.6g} >= K(x0); maximum not unique")

    # K > 0 on the open chart
    u = rng.standard_normal((n_samples, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    r = R * 0.999 * rng.random(n_samples) ** (1.0 / n)
    pts = u * r[:, None]
    pts = np.vstack([pts, [b.center for b in field.bumps]]) if field.bumps else pts
    kmin = min(eval_jet(field, p).K for p in pts)
    if kmin <= 0.0:
        report.violations.append(f"K not positive on chart: sampled min {kmin:.6g}")

    report.valid = not report.violations
    return report


def pure_quartic(n: int = 5) -> CurvatureField:
    return CurvatureField(n=n)


def with_bumps(n: int, bumps: Sequence[dict], chart_radius: float = 1.0) -> CurvatureField:
    return CurvatureField(n=n, bumps=tuple(Bump(**b) for b in bumps), chart_radius=chart_radius)
