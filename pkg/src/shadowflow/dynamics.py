"""Right-hand sides of the reduced bubble flow.

Rates are expressed through the leading testings sigma_{k,i}; inverting the
diagonal leading block of the tangent-space Gram matrix gives

    xi_k,i' = kappa * sigma_{k,i} / (4n(n-1) * alpha_i * c_k),

with xi' = (alpha'/alpha, -lambda'/lambda, lambda a'). Error terms are not
part of the field; they enter through the integrator's perturbation channel.
"""
from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .coefficients import CoefficientSet
from .curvature import CurvatureField, eval_jet
from .errors import DomainError, UsageError
from .interaction import (POSITIVE_WEAK_LIMIT, ZERO_WEAK_LIMIT, BubbleState,
                          GreenKernelModel, dlog_lambda_eps, eps, grad_a_eps)

SLAVED = "slaved"
DYNAMIC = "dynamic"


class StateDerivative(NamedTuple):
    dlog_alpha: np.ndarray
    dlog_lambda: np.ndarray
    da: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.dlog_alpha, self.dlog_lambda, self.da.ravel()])

    def __add__(self, other):
        return StateDerivative(self.dlog_alpha + other.dlog_alpha,
                               self.dlog_lambda + other.dlog_lambda, self.da + other.da)


class SigmaTriple(NamedTuple):
    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma3: np.ndarray


def _jets(state: BubbleState, field: CurvatureField):
    return [eval_jet(field, state.a[i]) for i in range(state.p)]


def equilibrium_alpha(state: BubbleState, field: CurvatureField,
                      coeffs: CoefficientSet, jets=None) -> np.ndarray:
    """Amplitudes solving kappa * alpha^(4/(n-2)) * K(a_i) = 4n(n-1)."""
    n = state.n
    jets = jets if jets is not None else _jets(state, field)
    K = np.array([j.K for j in jets])
    if np.any(K <= 0):
        raise DomainError(f"K must be positive at all centers, got {K}")
    return (coeffs.A / (coeffs.kappa * K)) ** ((n - 2) / 4)


def _ratio(state, field, coeffs, jets, alpha):
    n = state.n
    K = np.array([j.K for j in jets])
    return coeffs.kappa * alpha ** (4 / (n - 2)) * K / coeffs.A


def sigma_leading(state: BubbleState, field: CurvatureField, kernel: GreenKernelModel,
                  coeffs: CoefficientSet, jets=None) -> SigmaTriple:
    """Leading-order testings of the flow against the bubble tangent directions."""
    if state.mode != ZERO_WEAK_LIMIT:
        raise UsageError("sigma_leading is defined in zero-weak-limit mode")
    n, p = state.n, state.p
    jets = jets if jets is not None else _jets(state, field)
    A, lam, alpha = coeffs.A, state.lam, state.alpha
    rho = _ratio(state, field, coeffs, jets, alpha)
    s1, s2, s3 = np.zeros(p), np.zeros(p), np.zeros((p, n))
    for i in range(p):
        Ji, li = jets[i], lam[i]
        inter_l, inter_a, eps_sum, cross = 0.0, np.zeros(n), 0.0, 0.0
        for j in range(p):
            if j == i:
                continue
            w = alpha[j] / alpha[i]
            inter_l += w * dlog_lambda_eps(state, kernel, i, j)
            inter_a += w * grad_a_eps(state, kernel, i, j)
            e = eps(state, kernel, i, j)
            eps_sum += alpha[j] * e
            cross += alpha[j] * A * (rho[j] - 1.0) * e
        s1[i] = (alpha[i] * A * (rho[i] - 1.0) * coeffs.c1
                 + coeffs.b1 * cross + coeffs.b1 * A * rho[i] * eps_sum)
        s2[i] = A * coeffs.c2 * alpha[i] * (
            coeffs.gamma1 * kernel.H(state.a[i]) / li ** (n - 2)
            + rho[i] * coeffs.gamma2 * Ji.lapK / (Ji.K * li ** 2)
            - coeffs.b_lambda * rho[i] * inter_l)
        s3[i] = A * coeffs.c3 * alpha[i] * (
            rho[i] * (coeffs.gamma3 * Ji.gradK / (Ji.K * li)
                      + coeffs.gamma_nabla_lap * Ji.gradLapK / (Ji.K * li ** 3))
            + coeffs.b_a * rho[i] * inter_a)
    return SigmaTriple(s1, s2, s3)


def _from_sigma(state, coeffs, sig: SigmaTriple, alpha_mode: str) -> StateDerivative:
    scale = coeffs.kappa / (coeffs.A * state.alpha)
    xi1 = scale * sig.sigma1 / coeffs.c1
    xi2 = scale * sig.sigma2 / coeffs.c2
    xi3 = (scale / coeffs.c3)[:, None] * sig.sigma3
    dlog_alpha = xi1 if alpha_mode == DYNAMIC else np.zeros(state.p)
    return StateDerivative(dlog_alpha, -xi2, xi3 / state.lam[:, None])


def rhs_zero_weak_limit(state: BubbleState, field: CurvatureField, kernel: GreenKernelModel,
                        coeffs: CoefficientSet, alpha_mode: str = SLAVED) -> StateDerivative:
    if state.mode != ZERO_WEAK_LIMIT:
        raise UsageError("rhs_zero_weak_limit needs a zero-weak-limit state")
    if alpha_mode not in (SLAVED, DYNAMIC):
        raise UsageError(f"alpha_mode must be {SLAVED!r} or {DYNAMIC!r}, got {alpha_mode!r}")
    jets = _jets(state, field)
    if alpha_mode == SLAVED:
        state = replace(state, alpha=equilibrium_alpha(state, field, coeffs, jets))
    sig = sigma_leading(state, field, kernel, coeffs, jets)
    return _from_sigma(state, coeffs, sig, alpha_mode)


def rhs_positive_weak_limit(state: BubbleState, field: CurvatureField,
                            kernel: GreenKernelModel, coeffs: CoefficientSet) -> StateDerivative:
    """Flow with a positive weak limit: the omega term replaces the mass term."""
    if state.mode != POSITIVE_WEAK_LIMIT:
        raise UsageError("rhs_positive_weak_limit needs a positive-weak-limit state")
    n, p = state.n, state.p
    jets = _jets(state, field)
    lam, alpha, kappa = state.lam, state.alpha, coeffs.kappa
    dll, da = np.zeros(p), np.zeros((p, n))
    for i in range(p):
        Ji, li = jets[i], lam[i]
        if Ji.K <= 0:
            raise DomainError(f"K must be positive at a_{i}, got {Ji.K}")
        inter_l, inter_a = 0.0, np.zeros(n)
        for j in range(p):
            if j == i:
                continue
            w = alpha[j] / alpha[i]
            inter_l += w * dlog_lambda_eps(state, kernel, i, j)
            inter_a += w * grad_a_eps(state, kernel, i, j)
        minus_dll = kappa * (
            coeffs.gamma1 * state.alpha_global * state.omega[i]
            / (alpha[i] * Ji.K * li ** ((n - 2) / 2))
            - coeffs.b_lambda * inter_l)
        dll[i] = -minus_dll
        da[i] = kappa * (coeffs.gamma3 * Ji.gradK / (Ji.K * li) + coeffs.b_a * inter_a) / li
    return StateDerivative(np.zeros(p), dll, da)


class ShadowFlow:
    """Vector field y -> y' on the flat layout [ln alpha, ln lambda, a].

    ``mconf`` switches to the modified field. In slaved mode ``project``
    resets the stored amplitudes to equilibrium after each accepted step.
    """

    def __init__(self, template: BubbleState, field: CurvatureField, kernel: GreenKernelModel,
                 coeffs: CoefficientSet, alpha_mode: str = SLAVED, mconf=None):
        if mconf is not None and template.mode != ZERO_WEAK_LIMIT:
            raise UsageError("the modified flow is defined in zero-weak-limit mode")
        self.template = template
        self.field = field
        self.kernel = kernel
        self.coeffs = coeffs
        self.alpha_mode = alpha_mode if template.mode == ZERO_WEAK_LIMIT else SLAVED
        self.mconf = mconf

    def state(self, y) -> BubbleState:
        return self.template.from_vector(y)

    def _coeffs_at(self, t):
        c = self.coeffs
        return c if c.kappa_fn is None else replace(c, kappa=c.kappa_at(t))

    def derivative(self, t: float, state: BubbleState) -> StateDerivative:
        coeffs = self._coeffs_at(t)
        if state.mode == POSITIVE_WEAK_LIMIT:
            return rhs_positive_weak_limit(state, self.field, self.kernel, coeffs)
        if self.mconf is not None:
            from .modification import rhs_modified
            return rhs_modified(state, self.field, self.kernel, coeffs, self.mconf,
                                alpha_mode=self.alpha_mode)
        return rhs_zero_weak_limit(state, self.field, self.kernel, coeffs, self.alpha_mode)

    def __call__(self, t: float, y) -> np.ndarray:
        return self.derivative(t, self.state(y)).to_vector()

    def project(self, t: float, y) -> np.ndarray:
        if self.alpha_mode != SLAVED or self.template.mode != ZERO_WEAK_LIMIT:
            return y
        st = self.state(y)
        y = np.array(y, dtype=float)
        y[:st.p] = np.log(equilibrium_alpha(st, self.field, self._coeffs_at(t)))
        return y
