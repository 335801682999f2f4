"""Monte-Carlo checks of the bubble integrals behind the reduced model.

The normalized density phi^(2n/(n-2)) / c1 of a flat bubble is a scaled
multivariate Student t with n degrees of freedom, so it can be sampled
exactly and used as an importance proposal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from .coefficients import KINDS, bubble_constant
from .errors import ConsistencyError, PrecisionError, UsageError

BATCH = 1_000_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples: int
    seed: int

    @property
    def rel_err(self) -> float:
        return self.stderr / abs(self.value) if self.value else math.inf


class BubbleSpec(NamedTuple):
    center: np.ndarray
    lam: float


def flat_bubble(x, a, lam: float, n: Optional[int] = None) -> np.ndarray:
    """(lam / (1 + lam^2 |x - a|^2))^((n-2)/2), vectorized over rows of x."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    n = x.shape[-1] if n is None else n
    r2 = np.sum((x - a) ** 2, axis=-1)
    return (lam / (1.0 + lam * lam * r2)) ** ((n - 2) / 2)


def flat_eps(bi: BubbleSpec, bj: BubbleSpec, n: int) -> float:
    """Interaction with the leading kernel g = |a - b|^2."""
    d = np.asarray(bi.center) - np.asarray(bj.center)
    base = bi.lam / bj.lam + bj.lam / bi.lam + bi.lam * bj.lam * float(d @ d)
    return base ** ((2 - n) / 2)


def _t_sample(rng, size, n, nu):
    z = rng.standard_normal((size, n))
    w = rng.chisquare(nu, size)
    return z / np.sqrt(w / nu)[:, None]


def _t_logpdf(y, n, nu):
    r2 = np.sum(y * y, axis=-1)
    c = (special.gammaln((nu + n) / 2) - special.gammaln(nu / 2)
         - 0.5 * n * math.log(nu * math.pi))
    return c - (nu + n) / 2 * np.log1p(r2 / nu)


def _bubble_sample(rng, size, b: BubbleSpec, n):
    """Exact draws from phi_b^(2n/(n-2)) / c1."""
    y = _t_sample(rng, size, n, n)
    return np.asarray(b.center) + y / (b.lam * math.sqrt(n))


def _bubble_logpdf(x, b: BubbleSpec, n, log_c1):
    r2 = np.sum((x - np.asarray(b.center)) ** 2, axis=-1)
    return n * (math.log(b.lam) - np.log1p(b.lam * b.lam * r2)) - log_c1


def _batches(samples, seed):
    if samples < 2:
        raise UsageError("need at least 2 samples")
    sizes = [BATCH] * (samples // BATCH)
    if samples % BATCH:
        sizes.append(samples % BATCH)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, seqs))


def _reduce(sums, n_total, seed):
    s1 = sum(s[0] for s in sums)
    s2 = sum(s[1] for s in sums)
    mean = s1 / n_total
    var = max(s2 / n_total - mean * mean, 0.0)
    return McEstimate(mean, math.sqrt(var / (n_total - 1)), n_total, seed)


def verify_interaction(bi: BubbleSpec, bj: BubbleSpec, n: int = 5, samples: int = 10**7,
                       seed: int = 0, max_rel_err: float = 0.05):
    """Estimate the integral of phi_i^((n+2)/(n-2)) phi_j and its ratio to b1 eps_ij.

    Proposal: equal mixture of the two normalized bubble densities.
    """
    bi = BubbleSpec(np.asarray(bi[0], dtype=float), float(bi[1]))
    bj = BubbleSpec(np.asarray(bj[0], dtype=float), float(bj[1]))
    log_c1 = math.log(bubble_constant("c1", n))
    sums = []
    for size, ss in _batches(samples, seed):
        rng = np.random.default_rng(ss)
        half = size // 2
        x = np.vstack([_bubble_sample(rng, half, bi, n), _bubble_sample(rng, size - half, bj, n)])
        lq = np.logaddexp(_bubble_logpdf(x, bi, n, log_c1),
                          _bubble_logpdf(x, bj, n, log_c1)) - math.log(2.0)
        f = flat_bubble(x, bi.center, bi.lam, n) ** ((n + 2) / (n - 2)) \
            * flat_bubble(x, bj.center, bj.lam, n)
        w = f * np.exp(-lq)
        sums.append((float(w.sum()), float((w * w).sum())))
    est = _reduce(sums, samples, seed)
    if est.rel_err > max_rel_err:
        raise PrecisionError(
            f"relative standard error {est.rel_err:.3g} > {max_rel_err}; increase samples")
    ratio = est.value / (bubble_constant("b1", n) * flat_eps(bi, bj, n))
    return est, ratio


def _constant_integrand(kind, n, r2):
    if kind == "c1":
        return (1 + r2) ** (-n)
    if kind == "b1":
        return (1 + r2) ** (-(n + 2) / 2)
    if kind == "c2":
        return (n - 2) ** 2 / 4 * (r2 - 1) ** 2 / (1 + r2) ** (n + 2)
    return (n - 2) ** 2 / n * r2 / (1 + r2) ** (n + 2)


def verify_constant(kind: str, n: int = 5, samples: int = 10**6, seed: int = 0,
                    nu: float = 2.0, reject_sigmas: float = 5.0) -> McEstimate:
    """Importance-sampled estimate of a bubble constant (Student t proposal).

    Raises ConsistencyError when the estimate and the quadrature value
    disagree by more than ``reject_sigmas`` standard errors.
    """
    if kind not in KINDS:
        raise UsageError(f"unknown constant {kind!r}; expected one of {KINDS}")
    sums = []
    for size, ss in _batches(samples, seed):
        rng = np.random.default_rng(ss)
        y = _t_sample(rng, size, n, nu)
        r2 = np.sum(y * y, axis=1)
        w = _constant_integrand(kind, n, r2) * np.exp(-_t_logpdf(y, n, nu))
        sums.append((float(w.sum()), float((w * w).sum())))
    est = _reduce(sums, samples, seed)
    quad = bubble_constant(kind, n)
    if abs(est.value - quad) > reject_sigmas * est.stderr:
        raise ConsistencyError(
            f"{kind}: Monte Carlo {est.value:.6g} +- {est.stderr:.2g} disagrees with "
            f"quadrature {quad:.10g}")
    return est


def scale_separated_pair(eps_target: float, lam_outer: float = 100.0, n: int = 5):
    """Concentric bubbles with rho + 1/rho = eps^(-2/(n-2)); the inner one is sharper."""
    s = eps_target ** (-2.0 / (n - 2))
    rho = (s + math.sqrt(s * s - 4.0)) / 2.0
    c = np.zeros(n)
    return BubbleSpec(c, lam_outer * rho), BubbleSpec(c.copy(), lam_outer)
