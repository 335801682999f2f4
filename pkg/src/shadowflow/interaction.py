"""Bubble configurations and the pairwise interaction coefficient eps_ij.

The interaction of bubbles i and j is

    eps_ij = (l_i/l_j + l_j/l_i + l_i l_j g(a_i, a_j))^((2-n)/2)

with a model kernel g(a, b) = r^2 (1 + h0 r^(n-2)), r = |a - b|, standing in
for the rescaled Green's function. The derivative helpers return the exact
derivatives of this formula in ln(l_i) and a_i.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UsageError

EPS_BASE_CAP = 1e30  # above this base eps is flushed to exactly 0

ZERO_WEAK_LIMIT = "zero"
POSITIVE_WEAK_LIMIT = "positive"


@dataclass(frozen=True)
class GreenKernelModel:
    """Kernel g(a, b) and regular part H(a) of the Green's function model.

    ``regular_part`` may be a callable a -> H(a); when omitted H is the
    constant ``h0``.
    """

    n: int = 5
    h0: float = 0.5
    regular_part: Optional[Callable] = None

    def __post_init__(self):
        if self.h0 < 0:
            raise UsageError(f"h0 must be nonnegative, got {self.h0}")

    def H(self, a) -> float:
        if self.regular_part is None:
            return self.h0
        val = float(self.regular_part(np.asarray(a, dtype=float)))
        if not val > 0:
            raise DomainError(f"regular part H(a) must be positive, got {val}")
        return val

    def g(self, a, b) -> float:
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        r2 = float(d @ d)
        return r2 * (1.0 + self.h0 * r2 ** ((self.n - 2) / 2))

    def grad_g(self, a, b) -> np.ndarray:
        """Gradient of g in its first argument."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        r2 = float(d @ d)
        return (2.0 + self.n * self.h0 * r2 ** ((self.n - 2) / 2)) * d


@dataclass
class BubbleState:
    """p bubbles with amplitudes alpha, log scales and centers a (shape (p, n)).

    In positive-weak-limit mode ``omega`` holds omega_i > 0 per bubble and
    ``alpha_global`` the amplitude of the weak limit.
    """

    alpha: np.ndarray
    log_lambda: np.ndarray
    a: np.ndarray
    mode: str = ZERO_WEAK_LIMIT
    omega: Optional[np.ndarray] = None
    alpha_global: float = 1.0

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        self.log_lambda = np.atleast_1d(np.asarray(self.log_lambda, dtype=float)).copy()
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float)).copy()
        p = self.alpha.shape[0]
        if p < 1:
            raise UsageError("need at least one bubble")
        if self.log_lambda.shape != (p,) or self.a.shape[0] != p:
            raise UsageError(
                f"inconsistent shapes: alpha {self.alpha.shape}, "
                f"log_lambda {self.log_lambda.shape}, a {self.a.shape}")
        if np.any(~(self.alpha > 0)):
            raise DomainError(f"amplitudes must be positive, got {self.alpha}")
        if self.mode not in (ZERO_WEAK_LIMIT, POSITIVE_WEAK_LIMIT):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.mode == POSITIVE_WEAK_LIMIT:
            if self.omega is None:
                raise UsageError("positive-weak-limit mode needs omega values")
            self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float)).copy()
            if self.omega.shape != (p,) or np.any(~(self.omega > 0)):
                raise DomainError(f"omega must hold {p} positive values, got {self.omega}")
            if not self.alpha_global > 0:
                raise DomainError("alpha_global must be positive")

    @classmethod
    def single(cls, lam: float, a, alpha: float = 1.0, **kw) -> "BubbleState":
        return cls(alpha=[alpha], log_lambda=[np.log(lam)], a=[a], **kw)

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def lam(self) -> np.ndarray:
        return np.exp(self.log_lambda)

    def copy(self, **changes) -> "BubbleState":
        out = replace(self, **changes)
        return out

    # flat layout used by the integrator: [ln alpha, ln lambda, a.ravel()]
    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.log(self.alpha), self.log_lambda, self.a.ravel()])

    def from_vector(self, y) -> "BubbleState":
        p, n = self.p, self.n
        y = np.asarray(y, dtype=float)
        return BubbleState(alpha=np.exp(y[:p]), log_lambda=y[p:2 * p],
                           a=y[2 * p:].reshape(p, n), mode=self.mode,
                           omega=self.omega, alpha_global=self.alpha_global)


def _pair(state: BubbleState, i: int, j: int):
    if i == j:
        raise UsageError(f"interaction needs distinct bubbles, got i=j={i}")
    if not (0 <= i < state.p and 0 <= j < state.p):
        raise UsageError(f"bubble index out of range for p={state.p}: ({i}, {j})")
    li, lj = np.exp(state.log_lambda[i]), np.exp(state.log_lambda[j])
    return li, lj


def _base(state, kernel, i, j):
    li, lj = _pair(state, i, j)
    g = kernel.g(state.a[i], state.a[j])
    return li, lj, g, li / lj + lj / li + li * lj * g


def eps(state: BubbleState, kernel: GreenKernelModel, i: int, j: int) -> float:
    n = state.n
    _, _, _, base = _base(state, kernel, i, j)
    if base > EPS_BASE_CAP:
        return 0.0
    return base ** ((2 - n) / 2)


def dlog_lambda_eps(state: BubbleState, kernel: GreenKernelModel, i: int, j: int) -> float:
    """l_i d/dl_i eps_ij."""
    n = state.n
    li, lj, g, base = _base(state, kernel, i, j)
    if base > EPS_BASE_CAP:
        return 0.0
    e = base ** ((2 - n) / 2)
    return -(n - 2) / 2 * e ** (n / (n - 2)) * (li / lj - lj / li + li * lj * g)


def grad_a_eps(state: BubbleState, kernel: GreenKernelModel, i: int, j: int) -> np.ndarray:
    """(1/l_i) grad_{a_i} eps_ij."""
    n = state.n
    li, lj, g, base = _base(state, kernel, i, j)
    if base > EPS_BASE_CAP:
        return np.zeros(n)
    e = base ** ((2 - n) / 2)
    return -(n - 2) / 2 * e ** (n / (n - 2)) * lj * kernel.grad_g(state.a[i], state.a[j])


def eps_matrix(state: BubbleState, kernel: GreenKernelModel) -> np.ndarray:
    p = state.p
    E = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            E[i, j] = E[j, i] = eps(state, kernel, i, j)
    return E
