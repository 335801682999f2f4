"""Acceptance criteria 1-9, one PASS/FAIL line each (printed in the summary)."""
import math
import time

import numpy as np
from conftest import ACCEPTANCE, random_points

from shadowflow import (BubbleState, Config, ShadowFlow, UsageError, bubble_constant,
                        dlog_lambda_eps, eps, grad_a_eps, make_coefficients, pure_quartic,
                        run_compactified, run_divergence, run_exclusions, verify_batteries)
from shadowflow.cli import main
from shadowflow.config import OFF_MAX_BUMP
from shadowflow.curvature import with_bumps
from shadowflow.quadverify import (flat_eps, scale_separated_pair, verify_constant,
                                   verify_interaction)

N = 5


def record(k, passed, seconds, limit, detail):
    ok = passed and (limit is None or seconds < limit)
    budget = "" if limit is None else f" (limit {limit:g} s)"
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {seconds:7.2f} s{budget}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    return ok


def test_criterion_1_constants():
    t0 = time.perf_counter()
    c1, b1 = bubble_constant("c1", N), bubble_constant("b1", N)
    e_c1, e_b1 = abs(c1 - math.pi**3 / 32), abs(b1 - 8 * math.pi**2 / 15)
    sig = {}
    for kind in ("c1", "c2", "c3", "b1"):
        est = verify_constant(kind, N, 10**6, seed=0)
        sig[kind] = abs(est.value - bubble_constant(kind, N)) / est.stderr
    dt = time.perf_counter() - t0
    ok = e_c1 < 1e-6 and e_b1 < 1e-6 and max(sig.values()) < 3
    detail = (f"|c1 - pi^3/32| = {e_c1:.1e}, |b1 - 8pi^2/15| = {e_b1:.1e} (tol 1e-6); "
              "Monte Carlo deviation in s.e.: "
              + ", ".join(f"{k} {v:.2f}" for k, v in sig.items()) + " (tol 3)")
    assert record(1, ok, dt, 5, detail)


def test_criterion_2_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    g2s = np.concatenate([[1.0, 0.1, 1.9, 1 / 3], 10 ** rng.uniform(-8, 8, 10_000)])
    bad = 0
    for g2 in g2s:
        c = make_coefficients(N, {"gamma2": float(g2)})
        g2, g3 = c.gamma2, c.gamma3
        ok = (4 * 7 * g2 - 5 * 4 * g3 == -32 * g2
              and -784 * g2 + 224 * g3 == -112 * g2 and -112 * g2 < 0)
        bad += not ok
    try:
        make_coefficients(N, {"gamma3": 2.0})
        rejected = False
    except UsageError:
        rejected = True
    dt = time.perf_counter() - t0
    detail = (f"{g2s.size} coefficient sets, {bad} failures of exact equality; "
              f"inconsistent gamma3 rejected: {rejected}")
    assert record(2, bad == 0 and rejected, dt, None, detail)


def _divergence_verdicts(r):
    c = {name: r.check(name) for name in ("D1_lambda_cubed_over_t", "D2_center_monotone",
                                           "D3_regime_kept_0.9", "D4_mass_invariant")}
    return all(x.passed for x in c.values()), c


def test_criterion_3_divergence():
    t0 = time.perf_counter()
    base = run_divergence(Config())
    pert = run_divergence(Config().set("integrator.perturbation",
                                       {"family": "exp_decay", "c": 0.1, "beta": 1.0}))
    dt = time.perf_counter() - t0
    ok0, c0 = _divergence_verdicts(base)
    ok1, c1 = _divergence_verdicts(pert)
    detail = (f"lambda^3/t spread {c0['D1_lambda_cubed_over_t'].measured:.3g} (tol 0.1), "
              f"min lambda|a|^2 ratio {c0['D3_regime_kept_0.9'].measured:.4g} (tol 0.9), "
              f"ln(-lambda Lap K) drop {c0['D4_mass_invariant'].measured:.2g} "
              f"(tol {c0['D4_mass_invariant'].bound:.2g}); with exp_decay(0.1,1): spread "
              f"{c1['D1_lambda_cubed_over_t'].measured:.3g}, ratio "
              f"{c1['D3_regime_kept_0.9'].measured:.4g}, drop "
              f"{c1['D4_mass_invariant'].measured:.4g} (budget slack "
              f"{c1['D4_mass_invariant'].bound:.4g})")
    assert record(3, ok0 and ok1 and base.termination == pert.termination == "event:growth",
                  dt, 60, detail)


def test_criterion_4_compactification():
    t0 = time.perf_counter()
    r = run_compactified(Config())
    dt = time.perf_counter() - t0
    names = ("C2_enters_core", "C3_mass_dominates", "C4_lambda_below_10x", "C5_twin_diverges")
    ok = all(r.check(k).passed for k in names)
    detail = (f"max lambda/lambda0 {r.measured['lambda_max_ratio']:.4g} (tol 10), core entered "
              f"at t = {r.measured['t_enter_core']:.4g}, ln lambda rise after entry "
              f"{r.check('C3_mass_dominates').measured:.2g} (slack "
              f"{r.check('C3_mass_dominates').bound:.2g}), unmodified twin: "
              f"{r.twin.termination}")
    assert record(4, ok, dt, 60, detail)


def test_criterion_5_exclusions():
    t0 = time.perf_counter()
    r = run_exclusions(Config())
    dt = time.perf_counter() - t0
    names = ("mixed_psi_nondecreasing", "mixed_lambda_bounded", "offmax_psi_nondecreasing",
             "offmax_lambda_bounded", "tower_theta_nonincreasing",
             "tower_integrability_proxy", "tower_lambda_max_sign")
    ok = all(r.check(k).passed for k in names)
    detail = "; ".join(f"{k} {r.check(k).measured:.3g}/{r.check(k).bound:.3g}" for k in names)
    detail += f" (proxy: {r.check('tower_integrability_proxy').detail})"
    assert record(5, ok, dt, 120, detail)


def test_criterion_6_batteries():
    t0 = time.perf_counter()
    r = verify_batteries(seed=1, trials=10_000)
    dt = time.perf_counter() - t0
    m = r.measured
    viol = {k: m[k]["violation"] for k in ("eij_large", "eij_small", "perturbed_case")}
    kstar = r.check("vartheta_kappa_star").measured
    detail = (f"violations {viol}; min c eij_large {m['eij_large']['min']:.3g}, "
              f"max ratio eij_small {m['eij_small']['max']:.3g}, min c perturbed "
              f"{m['perturbed_case']['min']:.3g}; kappa* {kstar:.4f} (tol 2)")
    assert record(6, sum(viol.values()) == 0 and kstar <= 2, dt, 30, detail)


def _rich(f, x, v, h):
    """Richardson-extrapolated central difference of f along v."""
    d1 = (f(x + h * v) - f(x - h * v)) / (2 * h)
    d2 = (f(x + h / 2 * v) - f(x - h / 2 * v)) / h
    return d2 + (d2 - d1) / 3


def _rel(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300))


def test_criterion_7_derivatives():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    kernel = Config().kernel()
    coeffs = make_coefficients(N)
    worst = {"jet": 0.0, "eps": 0.0, "rhs": 0.0}
    fields = (pure_quartic(N), with_bumps(N, [OFF_MAX_BUMP]))
    pts = random_points(rng, 1000, N, 0.01, 1.0)
    eye = np.eye(N)
    for k, x in enumerate(pts):
        f = fields[k % 2]
        J = f.jet(x)
        h = 1e-3 * max(np.linalg.norm(x), 0.05)
        fd_grad = np.array([_rich(lambda y: f.jet(y).K, x, e, h) for e in eye])
        fd_hess = np.array([_rich(lambda y: f.jet(y).gradK, x, e, h) for e in eye])
        fd_glap = np.array([_rich(lambda y: f.jet(y).lapK, x, e, h) for e in eye])
        worst["jet"] = max(worst["jet"], _rel(J.gradK, fd_grad),
                           _rel(J.lapK, np.trace(fd_hess)), _rel(J.gradLapK, fd_glap))

        p = 2
        s = BubbleState(alpha=np.ones(p), log_lambda=rng.uniform(np.log(10), np.log(1e4), p),
                        a=np.array([x, random_points(rng, 1, N, 0.01, 1.0)[0]]))
        if eps(s, kernel, 0, 1) > 1e-12:
            for i, j in ((0, 1), (1, 0)):
                def e_of_ll(ll, i=i):
                    lv = s.log_lambda.copy()
                    lv[i] = ll[0]
                    return eps(s.copy(log_lambda=lv), kernel, i, j)

                def e_of_a(ai, i=i):
                    av = s.a.copy()
                    av[i] = ai
                    return eps(s.copy(a=av), kernel, i, j)
                fd_l = _rich(e_of_ll, s.log_lambda[i:i + 1], np.ones(1), 1e-4)
                # grad_a_eps is the scaled gradient (1/lambda_i) grad_{a_i} eps_ij
                fd_a = np.array([_rich(e_of_a, s.a[i], e, 1e-4 / s.lam.max())
                                 for e in eye]) / s.lam[i]
                worst["eps"] = max(worst["eps"], _rel(dlog_lambda_eps(s, kernel, i, j), fd_l),
                                   _rel(grad_a_eps(s, kernel, i, j), fd_a))

        # the rhs is smooth: directional derivatives at two step sizes agree
        flow = ShadowFlow(s, f, kernel, coeffs)
        y = s.to_vector()
        v = rng.standard_normal(y.size)
        v[:p] = 0.0
        v /= np.linalg.norm(v)
        h = 1e-4 * min(1.0, 1.0 / np.sqrt(s.lam.max()))
        d_h = _rich(lambda z: flow(0.0, z), y, v, h)
        d_h2 = _rich(lambda z: flow(0.0, z), y, v, h / 2)
        worst["rhs"] = max(worst["rhs"], _rel(d_h2, d_h))
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{k} {v:.2g}" for k, v in worst.items()) + \
        " (max relative error over 1000 points, tol 1e-5)"
    assert record(7, max(worst.values()) < 1e-5, dt, 10, detail)


def test_criterion_8_interaction():
    t0 = time.perf_counter()
    bi, bj = scale_separated_pair(0.01, 100.0, N)
    est, ratio = verify_interaction(bi, bj, N, 10**7, seed=8)
    dt = time.perf_counter() - t0
    detail = (f"eps_ij {flat_eps(bi, bj, N):.3g}, ratio {ratio:.4f} +- "
              f"{ratio * est.rel_err:.1g} (band [0.9, 1.1]), 10^7 samples")
    assert record(8, 0.9 <= ratio <= 1.1, dt, 120, detail)


def test_criterion_9_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "det.toml"
    cfg.write_text('[integrator.perturbation]\nfamily = "power"\nc = 0.05\ns = 1.0\n'
                   'sign = "random"\n')
    outs = [tmp_path / f"run{k}" for k in range(2)]
    codes = [main(["run", "divergence", "--config", str(cfg), "--seed", "11", "--out", str(o)])
             for o in outs]
    capsys.readouterr()
    blobs = [(o / "divergence.csv").read_bytes() for o in outs]
    dt = time.perf_counter() - t0
    same = blobs[0] == blobs[1] and len(blobs[0]) > 0
    rows = blobs[0].count(b"\n") - 1
    detail = f"two seeded runs: {rows} CSV rows, bit-identical: {same}, exit codes {codes}"
    assert record(9, same, dt, None, detail)

