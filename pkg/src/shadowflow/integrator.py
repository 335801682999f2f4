"""Adaptive Dormand-Prince 5(4) integration of the reduced flow.

States live in the flat layout [ln alpha, ln lambda, a], so positivity of
alpha and lambda never depends on step size. An explicit perturbation
channel adds a signed rate pert(t) to selected log coordinates; it stands
in for the error terms the reduced field leaves out.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import RhsError, StiffnessError, UsageError
from .interaction import BubbleState

FAMILIES = ("off", "exp_decay", "power", "nonintegrable")
CHANNELS = ("log_alpha", "log_lambda")
N_SIGN_BINS = 512


@dataclass(frozen=True)
class PerturbationModel:
    """Injected rate of magnitude pert(t) on the selected channels.

    Families: off, exp_decay (c e^(-beta t)), power (c (1+t)^-(1+s)) and
    nonintegrable (c / (1+t)). With ``sign="adversarial"`` the scenario sets
    ``direction`` (+1 or -1); with ``sign="random"`` the sign is constant on
    dyadic bins [2^k - 1, 2^(k+1) - 1) and drawn from ``seed``.
    """

    family: str = "off"
    c: float = 0.0
    beta: float = 1.0
    s: float = 1.0
    sign: str = "adversarial"
    direction: float = -1.0
    seed: int = 0
    channels: tuple = ("log_lambda",)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown perturbation family {self.family!r}; expected {FAMILIES}")
        if self.sign not in ("adversarial", "random"):
            raise UsageError(f"unknown sign policy {self.sign!r}")
        if self.family != "off" and not self.c > 0:
            raise UsageError(f"perturbation size c must be positive, got {self.c}")
        if self.family == "exp_decay" and not self.beta > 0:
            raise UsageError("exp_decay needs beta > 0")
        if self.family == "power" and not self.s > 0:
            raise UsageError("power family needs s > 0")
        bad = set(self.channels) - set(CHANNELS)
        if bad:
            raise UsageError(f"unknown perturbation channel(s) {sorted(bad)}; expected {CHANNELS}")
        object.__setattr__(self, "channels", tuple(self.channels))
        signs = np.random.default_rng(self.seed).choice([-1.0, 1.0], size=N_SIGN_BINS)
        object.__setattr__(self, "_signs", signs)

    @property
    def integrable(self) -> bool:
        return self.family != "nonintegrable"

    def magnitude(self, t: float) -> float:
        if self.family == "off":
            return 0.0
        if self.family == "exp_decay":
            return self.c * math.exp(-self.beta * t)
        if self.family == "power":
            return self.c * (1.0 + t) ** (-(1.0 + self.s))
        return self.c / (1.0 + t)

    def sign_at(self, t: float) -> float:
        if self.sign == "adversarial":
            return float(np.sign(self.direction) or 1.0)
        k = min(int(math.floor(math.log2(1.0 + max(t, 0.0)))), N_SIGN_BINS - 1)
        return float(self._signs[k])

    def vector(self, t: float, p: int, n: int) -> np.ndarray:
        out = np.zeros(2 * p + p * n)
        m = self.magnitude(t)
        if m == 0.0:
            return out
        v = m * self.sign_at(t)
        if "log_alpha" in self.channels:
            out[:p] = v
        if "log_lambda" in self.channels:
            out[p:2 * p] = v
        return out


def pert_budget(pert: PerturbationModel, t0: float = 0.0, t1: float = math.inf) -> float:
    """Closed-form integral of pert(t) over [t0, t1]."""
    if t1 < t0:
        raise UsageError(f"need t1 >= t0, got [{t0}, {t1}]")
    c = pert.c
    if pert.family == "off":
        return 0.0
    if pert.family == "exp_decay":
        return c / pert.beta * (math.exp(-pert.beta * t0) - math.exp(-pert.beta * t1))
    if pert.family == "power":
        return c / pert.s * ((1.0 + t0) ** -pert.s - (1.0 + t1) ** -pert.s)
    return c * (math.log1p(t1) - math.log1p(t0)) if math.isfinite(t1) else math.inf


@dataclass
class Event:
    """Zero crossing of ``fn(t, state)``.

    ``direction`` +1 fires on upward crossings, -1 on downward ones and 0 on
    both.
    """

    name: str
    fn: Callable[[float, BubbleState], float]
    direction: int = 0
    terminal: bool = True


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0


@dataclass
class Trajectory:
    template: BubbleState
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    diagnostics: list = field(default_factory=list)
    termination: str = "t_end"
    events: list = field(default_factory=list)
    stats: StepStats = field(default_factory=StepStats)

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> BubbleState:
        return self.template.from_vector(self.y[k])

    def states(self) -> List[BubbleState]:
        return [self.state(k) for k in range(len(self.t))]

    @property
    def p(self):
        return self.template.p

    @property
    def log_lambda(self) -> np.ndarray:
        p = self.p
        return self.y[:, p:2 * p]

    @property
    def a(self) -> np.ndarray:
        p, n = self.p, self.template.n
        return self.y[:, 2 * p:].reshape(-1, p, n)

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.y[:, :self.p])

    def channel(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])

    def interpolate(self, t: float) -> np.ndarray:
        """Cubic Hermite value at time t."""
        k = int(np.clip(np.searchsorted(self.t, t) - 1, 0, len(self.t) - 2))
        return _hermite(self.t[k], self.t[k + 1], self.y[k], self.y[k + 1],
                        self.f[k], self.f[k + 1], t)

    def columns(self) -> list:
        p, n = self.p, self.template.n
        cols = ["t"] + [f"ln_lambda_{i}" for i in range(p)]
        cols += [f"a_{i}_{k}" for i in range(p) for k in range(n)]
        cols += [f"alpha_{i}" for i in range(p)]
        if self.diagnostics:
            cols += type(self.diagnostics[0]).header(p)
        return cols

    def rows(self):
        p = self.p
        for k in range(len(self.t)):
            y = self.y[k]
            row = [self.t[k], *y[p:2 * p], *y[2 * p:], *np.exp(y[:p])]
            if self.diagnostics:
                row += self.diagnostics[k].row()
            yield row

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def _hermite(t0, t1, y0, y1, f0, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _dopri_step(F, t, y, f, h, K):
    K[0] = f
    for s in range(1, 7):
        K[s] = F(t + _C[s] * h, y + h * np.dot(_A[s], K[:s]))
    return y + h * np.dot(_B, K)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                    187 / 2100, 1 / 40])


def integrate(rhs, y0: BubbleState, t_end: float, tol: float = 1e-8,
              pert: Optional[PerturbationModel] = None, events: Sequence[Event] = (),
              sampler: Optional[Callable] = None, atol: Optional[float] = None,
              max_steps: int = 1_000_000, wall_time: Optional[float] = None,
              t0: float = 0.0) -> Trajectory:
    """Integrate ``rhs(t, y)`` from ``y0`` to ``t_end``.

    Local error is measured in the max norm; on the ln alpha and ln lambda
    entries it is absolute at ``tol`` (a relative error in alpha and
    lambda), on the centers it is ``atol + tol |a|``.
    ``rhs`` may expose ``project(t, y)``, applied after every accepted step.
    ``sampler(t, state)`` supplies the diagnostic record stored per step.
    Stops at ``t_end``, the first terminal event, ``max_steps`` or
    ``wall_time`` seconds.
    """
    if not tol > 0:
        raise UsageError(f"tol must be positive, got {tol}")
    if not t_end > t0:
        raise UsageError(f"t_end must exceed t0={t0}, got {t_end}")
    pert = pert or PerturbationModel()
    rtol = tol
    atol = tol * 1e-3 if atol is None else atol
    template = y0
    p, n = y0.p, y0.n
    project = getattr(rhs, "project", None)
    stats = StepStats()

    def F(t, y):
        stats.rhs_evals += 1
        with np.errstate(all="ignore"):
            d = np.asarray(rhs(t, y), dtype=float)
        if pert.family != "off":
            d = d + pert.vector(t, p, n)
        if not np.all(np.isfinite(d)):
            raise RhsError(f"non-finite right-hand side at t={t:.6g}")
        return d

    def G(ev, t, y):
        return float(ev.fn(t, template.from_vector(y)))

    y = y0.to_vector()
    if project is not None:
        y = project(t0, y)
    t = float(t0)
    f = F(t, y)
    ts, ys, fs = [t], [y.copy()], [f.copy()]
    diags = [sampler(t, template.from_vector(y))] if sampler else []
    g_prev = [G(ev, t, y) for ev in events]
    fired = []

    # initial step (Hairer, Norsett and Wanner)
    # log channels already measure relative change, so their error is absolute
    is_log = np.arange(y.size) < 2 * p

    def scale(*ys):
        return np.where(is_log, rtol, atol + rtol * np.max(np.abs(ys), axis=0))

    sc = scale(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((f / sc) ** 2))
    span = t_end - t
    if d1 == 0.0:
        h = span
    else:
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = F(t + h0, y + h0 * f)
        d2 = np.sqrt(np.mean(((f1 - f) / sc) ** 2)) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100 * h0, h1, span)

    termination = "t_end"
    start = time.monotonic()
    K = np.empty((7, y.size))
    while t < t_end:
        if stats.accepted >= max_steps:
            termination = "max_steps"
            break
        if wall_time is not None and time.monotonic() - start > wall_time:
            termination = "wall_time"
            break
        h = min(h, t_end - t)
        if h < 1e-14 * max(abs(t), 1.0):
            raise StiffnessError(f"step size underflow h={h:.3g} at t={t:.6g}", t=t,
                                 state=template.from_vector(y))
        y_new = _dopri_step(F, t, y, f, h, K)
        err_vec = h * np.dot(_E, K)
        sc = scale(y, y_new)
        err = float(np.max(np.abs(err_vec) / sc))
        if not math.isfinite(err):
            raise RhsError(f"non-finite error estimate at t={t:.6g}")
        if err > 1.0:
            stats.rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        t_new = t + h
        f_new = K[6].copy()
        if project is not None:
            y_proj = project(t_new, y_new)
            if not np.array_equal(y_proj, y_new):
                y_new = y_proj
                f_new = F(t_new, y_new)
        stats.accepted += 1

        # events on the accepted step
        hit = None
        g_new = [G(ev, t_new, y_new) for ev in events]
        for k, ev in enumerate(events):
            a, b = g_prev[k], g_new[k]
            up = a < 0.0 <= b
            down = a > 0.0 >= b
            if (ev.direction >= 0 and up) or (ev.direction <= 0 and down):
                fn = lambda tt: G(ev, tt, _hermite(t, t_new, y, y_new, f, f_new, tt))
                te = t_new if fn(t_new) == 0.0 or fn(t) * fn(t_new) > 0 else \
                    brentq(fn, t, t_new, xtol=1e-12 * max(1.0, abs(t_new)))
                fired.append((ev.name, te))
                if ev.terminal and (hit is None or te < hit[1]):
                    hit = (ev, te)
        g_prev = g_new

        if hit is not None:
            ev, te = hit
            if te < t_new:
                # polish the root on genuine short steps rather than the interpolant
                def land(tt):
                    yy = _dopri_step(F, t, y, f, tt - t, np.empty_like(K))
                    return project(tt, yy) if project is not None else yy
                fn = lambda tt: G(ev, tt, land(tt))
                if fn(t) * fn(t_new) < 0:
                    te_fine = brentq(fn, t, t_new, xtol=1e-13 * max(1.0, abs(t_new)))
                    fired[fired.index((ev.name, te))] = (ev.name, te_fine)
                    te = te_fine
                y_new = land(te)
                f_new = F(te, y_new)
                t_new = te
            termination = f"event:{hit[0].name}"

        t, y, f = t_new, y_new, f_new
        ts.append(t)
        ys.append(y.copy())
        fs.append(f.copy())
        if sampler:
            diags.append(sampler(t, template.from_vector(y)))
        if hit is not None:
            break
        h *= min(10.0, 0.9 * err ** -0.2) if err > 0 else 10.0

    fired = [e for e in fired if e[1] <= t]
    return Trajectory(template=template, t=np.array(ts), y=np.array(ys), f=np.array(fs),
                      diagnostics=diags, termination=termination, events=fired, stats=stats)
