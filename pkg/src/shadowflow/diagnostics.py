"""Monitoring functionals and discrete monotonicity verdicts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coefficients import CoefficientSet
from .curvature import CurvatureField, eval_jet
from .errors import DomainError, UsageError
from .interaction import BubbleState, GreenKernelModel, eps_matrix
from .modification import eta2

NONINCREASING = "nonincreasing"
NONDECREASING = "nondecreasing"


def theta(state: BubbleState, mconf=None, C: float = 10.0, eps: float = 1e-3) -> float:
    """Weighted sum of eta(x_i) ln(x_i), x_i = lambda_i |a_i|^5 / eps.

    Bubbles are ranked by x_i ascending and the k-th one (k = 1..p) gets
    weight C^k.
    """
    if not C > 1:
        raise UsageError(f"weight base C must exceed 1, got {C}")
    prof = eta2 if mconf is None else mconf.eta2
    r = np.linalg.norm(state.a, axis=1)
    x = state.lam * r**5 / eps
    total = 0.0
    for k, xi in enumerate(np.sort(x), start=1):
        if xi > 1.0:
            total += C**k * float(prof(xi)) * np.log(xi)
    return total


def psi(state: BubbleState, C: float = 10.0, subset: Optional[Sequence[int]] = None) -> float:
    """Sum of C^k ln(1/lambda_i) with the subset ranked by 1/lambda descending."""
    if not C > 1:
        raise UsageError(f"weight base C must exceed 1, got {C}")
    idx = list(range(state.p)) if subset is None else list(subset)
    if not idx:
        raise UsageError("psi needs a nonempty subset of bubbles")
    logs = np.sort(state.log_lambda[idx])  # ascending lambda = descending 1/lambda
    return float(sum(C**k * (-ll) for k, ll in enumerate(logs, start=1)))


def mass_scale_invariant(state: BubbleState, field: CurvatureField, i: int = 0) -> float:
    """-lambda_i Laplacian K(a_i); defined where the Laplacian is negative."""
    lap = eval_jet(field, state.a[i]).lapK
    if lap >= 0:
        raise DomainError(
            f"Laplacian K(a_{i}) = {lap:.6g} >= 0: outside the divergence regime")
    return -float(state.lam[i]) * lap


def energy_surrogate(state: BubbleState, field: CurvatureField, coeffs: CoefficientSet) -> float:
    """4n(n-1) c1^(2/n) (sum_i K_i^((2-n)/2))^(2/n).

    For one bubble this is the energy of a bubble sitting at a_1.
    """
    n = state.n
    K = np.array([eval_jet(field, a).K for a in state.a])
    if np.any(K <= 0):
        raise DomainError("energy surrogate needs K > 0 at all centers")
    return coeffs.A * coeffs.c1 ** (2 / n) * float(np.sum(K ** ((2 - n) / 2))) ** (2 / n)


@dataclass
class LyapunovVerdict:
    passed: bool
    violation: float
    worst_step: float
    worst_index: int
    slack: float


def check_lyapunov(series, direction: str = NONINCREASING, slack: float = 0.0) -> LyapunovVerdict:
    """Pass iff the total wrong-direction movement is at most ``slack``."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise UsageError("series needs at least two samples")
    if slack < 0:
        raise UsageError("slack must be nonnegative")
    d = np.diff(x)
    if direction == NONINCREASING:
        bad = np.maximum(d, 0.0)
    elif direction == NONDECREASING:
        bad = np.maximum(-d, 0.0)
    else:
        raise UsageError(f"unknown direction {direction!r}")
    total = float(bad.sum())
    k = int(np.argmax(bad))
    return LyapunovVerdict(total <= slack, total, float(bad[k]), k, float(slack))


@dataclass
class DiagnosticSample:
    t: float
    lam_a2: np.ndarray
    lam_a5: np.ndarray
    neg_lam_lapK: np.ndarray
    theta: float
    psi: float
    energy: float
    eps: np.ndarray  # upper triangle of the interaction matrix, row-major

    def row(self) -> list:
        return [*self.lam_a2, *self.lam_a5, *self.neg_lam_lapK, self.theta, self.psi,
                self.energy, *self.eps]

    @staticmethod
    def header(p: int) -> list:
        cols = [f"lam_a2_{i}" for i in range(p)] + [f"lam_a5_{i}" for i in range(p)]
        cols += [f"neg_lam_lapK_{i}" for i in range(p)] + ["theta", "psi", "energy"]
        cols += [f"eps_{i}_{j}" for i in range(p) for j in range(i + 1, p)]
        return cols


def sample(t: float, state: BubbleState, field: CurvatureField, kernel: GreenKernelModel,
           coeffs: CoefficientSet, mconf=None, C: float = 10.0,
           theta_eps: float = 1e-3) -> DiagnosticSample:
    lam = state.lam
    r2 = np.sum(state.a**2, axis=1)
    lap = np.array([eval_jet(field, a).lapK for a in state.a])
    E = eps_matrix(state, kernel)
    iu = np.triu_indices(state.p, 1)
    return DiagnosticSample(
        t=float(t), lam_a2=lam * r2, lam_a5=lam * r2**2.5, neg_lam_lapK=-lam * lap,
        theta=theta(state, mconf, C, theta_eps), psi=psi(state, C),
        energy=energy_surrogate(state, field, coeffs), eps=E[iu])
