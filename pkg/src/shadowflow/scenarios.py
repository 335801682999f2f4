"""Canned experiments with pass/fail verdicts, and randomized inequality batteries."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .config import Config
from .curvature import eval_jet, validate_condition
from .diagnostics import NONDECREASING, NONINCREASING, check_lyapunov, psi, sample
from .dynamics import ShadowFlow
from .errors import ConsistencyError, UsageError
from .integrator import Event, Trajectory, integrate, pert_budget
from .interaction import (POSITIVE_WEAK_LIMIT, BubbleState, GreenKernelModel,
                          dlog_lambda_eps, eps, eps_matrix, grad_a_eps)
from .modification import measure_kappa_star, vartheta

# Every check must point at one of these claims.
ANCHORS = {
    "divergence.lambda_cubed_linear": "lambda^3 grows linearly in time along the escaping line",
    "divergence.center_to_max": "the center converges to the maximum of K",
    "divergence.regime_kept": "lambda|a|^2 stays bounded below: the line never leaves the regime",
    "divergence.mass_invariant": "ln(-lambda Lap K(a)) is nondecreasing up to integrable errors",
    "compact.bounded_product": "lambda|a|^2 is bounded along the modified flow",
    "compact.enters_core": "the modified flow drives lambda|a|^2 below the inner threshold",
    "compact.mass_dominates": "inside the core the mass term shrinks lambda",
    "compact.no_escape": "lambda -> infinity is impossible along the modified flow",
    "compact.twin_diverges": "the unmodified flow from the same data escapes",
    "mixed.psi_monotone": "psi is nondecreasing when the weak limit is positive",
    "mixed.lambda_bounded": "all lambda_i stay bounded when the weak limit is positive",
    "offmax.psi_monotone": "psi over bubbles near x_j != x0 is nondecreasing",
    "offmax.lambda_bounded": "no concentration at critical points with positive Laplacian",
    "tower.theta_monotone": "Theta is nonincreasing up to integrable errors",
    "tower.theta_bounded": "Theta stays bounded",
    "tower.integrability": "the weighted interaction and gradient terms are integrable",
    "tower.lambda_max_sign": "the largest scale contracts once all lambda|a|^5 <= 4 eps",
    "battery.eij_large": "weighted scale derivatives of the interactions dominate them",
    "battery.eij_small": "weighted center derivatives of the interactions are controlled",
    "battery.perturbed_case": "cut-off weighted scale derivatives dominate the interactions",
    "battery.vartheta": "the cut-off weight is quasi-monotone",
    "hypothesis.integrable_error": "the error rate is integrable in time",
}


@dataclass
class Check:
    name: str
    anchor: str
    passed: bool
    measured: float
    bound: float
    informational: bool = False
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    config: dict
    checks: List[Check] = field(default_factory=list)
    files: List[str] = field(default_factory=list)
    measured: dict = field(default_factory=dict)
    termination: str = ""

    def add(self, name, anchor, passed, measured, bound, informational=False, detail=""):
        self.checks.append(Check(name, anchor, bool(passed), float(measured), float(bound),
                                 informational, detail))

    def validate(self) -> None:
        bad = [c.name for c in self.checks if c.anchor not in ANCHORS]
        if bad:
            raise ConsistencyError(f"checks without a registered claim: {bad}")

    @property
    def passed(self) -> bool:
        self.validate()
        return all(c.passed for c in self.checks if not c.informational)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "termination": self.termination,
                "checks": [asdict(c) for c in self.checks], "files": self.files,
                "measured": self.measured, "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def demote(self) -> None:
        for c in self.checks:
            c.informational = True


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


class _Model:
    """Objects built once per run from a config."""

    def __init__(self, cfg: Config, extra_bumps=()):
        self.cfg = cfg
        self.field = cfg.field(extra_bumps)
        self.kernel = cfg.kernel()
        self.coeffs = cfg.coeffs()
        self.mconf = cfg.mconf()
        self.tol = float(cfg.get("integrator.tol"))
        self.wall = cfg.get("integrator.wall_time")
        self.max_steps = int(cfg.get("integrator.max_steps"))
        self.C = float(cfg.scenario("C"))

    def sampler(self, theta_eps=1e-3):
        def f(t, st):
            return sample(t, st, self.field, self.kernel, self.coeffs, self.mconf,
                          self.C, theta_eps)
        return f

    def flow(self, state, modified=False):
        return ShadowFlow(state, self.field, self.kernel, self.coeffs,
                          alpha_mode=self.cfg.scenario("alpha_mode"),
                          mconf=self.mconf if modified else None)

    def run(self, state, t_end, pert, events, modified=False, theta_eps=1e-3):
        return integrate(self.flow(state, modified), state, t_end, tol=self.tol, pert=pert,
                         events=events, sampler=self.sampler(theta_eps), wall_time=self.wall,
                         max_steps=self.max_steps)


def _write(report: ScenarioReport, traj: Optional[Trajectory], out_dir, tag: str):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    if traj is not None:
        path = os.path.join(out_dir, f"{tag}.csv")
        traj.to_csv(path)
        report.files.append(path)


def _hypothesis_check(report: ScenarioReport, pert) -> bool:
    ok = pert.integrable
    report.measured["hypotheses_met"] = ok
    report.add("integrable_error", "hypothesis.integrable_error", ok,
               pert_budget(pert, 0.0, 1e6), math.inf, informational=True,
               detail="" if ok else "hypothesis int pert < inf violated")
    return ok


def _single_state(cfg: Config) -> BubbleState:
    n = cfg.n
    a = np.zeros(n)
    a[0] = float(cfg.scenario("a0"))
    return BubbleState.single(float(cfg.scenario("lambda0")), a)


def _check_divergence_hypotheses(cfg: Config):
    eps0, a0, lam0 = (float(cfg.scenario(k)) for k in ("eps0", "a0", "lambda0"))
    if not abs(a0) <= eps0:
        raise UsageError(f"hypothesis |a0| <= eps0 violated: |a0|={a0}, eps0={eps0}")
    if not lam0 * a0**2 > 1.0 / eps0:
        raise UsageError(
            f"hypothesis lambda0 |a0|^2 > 1/eps0 violated: {lam0 * a0**2:.6g} <= {1 / eps0:.6g}")


def _divergence_traj(model: _Model, cfg: Config, pert):
    state = _single_state(cfg)
    lam0 = float(cfg.scenario("lambda0"))
    target = float(cfg.scenario("growth")) * lam0
    lam_min = float(cfg.scenario("lambda_min"))
    ev = [Event("growth", lambda t, st: st.lam[0] - target, +1),
          Event("lambda_min", lambda t, st: st.lam[0] - lam_min, -1)]
    return model.run(state, 1e30, pert, ev)


def run_divergence(cfg: Optional[Config] = None, out_dir=None) -> ScenarioReport:
    """Single bubble escaping at the degenerate maximum."""
    cfg = cfg or Config()
    _check_divergence_hypotheses(cfg)
    model = _Model(cfg)
    pert = cfg.pert(direction=-1.0)
    report = ScenarioReport("divergence", cfg.data)
    integrable = _hypothesis_check(report, pert)
    traj = _divergence_traj(model, cfg, pert)
    report.termination = traj.termination
    budget = pert_budget(pert, 0.0, traj.t[-1])
    bC = float(cfg.scenario("budget_C"))
    tol = model.tol

    lam = np.exp(traj.log_lambda[:, 0])
    t = traj.t
    half = t >= t[-1] / 2
    ratio = lam[half] ** 3 / t[half]
    spread = float((ratio.max() - ratio.min()) / ratio.mean()) if ratio.size > 1 else math.inf
    report.add("D1_lambda_cubed_over_t", "divergence.lambda_cubed_linear",
               spread < 0.1 and ratio.min() > 0 and traj.termination == "event:growth",
               spread, 0.1, detail=f"lambda^3/t ~ {ratio.mean():.6g}")

    r = np.linalg.norm(traj.a[:, 0], axis=1)
    report.add("D2_center_halved", "divergence.center_to_max", r[-1] < r[0] / 2,
               r[-1] / r[0], 0.5)
    mono = check_lyapunov(r, NONINCREASING, 0.0)
    report.add("D2_center_monotone", "divergence.center_to_max", mono.passed,
               mono.violation, 0.0)

    prod = traj.channel("lam_a2")[:, 0]
    floor = prod[0] * math.exp(-bC * budget)
    report.add("D3_regime_kept", "divergence.regime_kept", prod.min() >= floor,
               prod.min() / prod[0], floor / prod[0])
    report.add("D3_regime_kept_0.9", "divergence.regime_kept", prod.min() >= 0.9 * prod[0],
               prod.min() / prod[0], 0.9)

    mass = np.log(traj.channel("neg_lam_lapK")[:, 0])
    slack = budget + 10 * tol
    v = check_lyapunov(mass, NONDECREASING, slack)
    report.add("D4_mass_invariant", "divergence.mass_invariant", v.passed, v.violation, slack)

    report.measured.update(lambda_growth=float(lam[-1] / lam[0]), t_final=float(t[-1]),
                           budget=budget, steps=traj.stats.accepted,
                           lambda_cubed_over_t=float(ratio.mean()))
    if not integrable:
        report.demote()
    report.trajectory = traj
    _write(report, traj, out_dir, "divergence")
    return report


def run_compactified(cfg: Optional[Config] = None, out_dir=None) -> ScenarioReport:
    """Same data as the divergence run, integrated along the modified field."""
    cfg = cfg or Config()
    _check_divergence_hypotheses(cfg)
    model = _Model(cfg)
    report = ScenarioReport("compactified", cfg.data)
    pert = cfg.pert(direction=+1.0)
    integrable = _hypothesis_check(report, pert)
    twin = _divergence_traj(model, cfg, cfg.pert(direction=-1.0))

    state = _single_state(cfg)
    lam0 = float(cfg.scenario("lambda0"))
    lam_cap = float(cfg.scenario("lambda_max_factor")) * lam0
    lam_min = float(cfg.scenario("lambda_min"))
    ev = [Event("lambda_max", lambda t, st: st.lam[0] - lam_cap, +1),
          Event("lambda_min", lambda t, st: st.lam[0] - lam_min, -1)]
    traj = model.run(state, 2.0 * twin.t[-1], pert, ev, modified=True)
    report.termination = traj.termination
    bC = float(cfg.scenario("budget_C"))
    tol = model.tol
    budget = pert_budget(pert, 0.0, traj.t[-1])
    eps_in = model.mconf.eps_inner

    prod = traj.channel("lam_a2")[:, 0]
    bound = max(prod[0], 2 * eps_in) * (1 + bC * budget)
    report.add("C1_product_bounded", "compact.bounded_product", prod.max() <= bound,
               prod.max(), bound)

    inside = np.nonzero(prod < 2 * eps_in)[0]
    entered = inside.size > 0
    t_in = float(traj.t[inside[0]]) if entered else math.inf
    report.add("C2_enters_core", "compact.enters_core", entered, t_in, traj.t[-1])

    if entered:
        k = inside[0]
        ll = traj.log_lambda[k:, 0]
        slack = pert_budget(pert, t_in, traj.t[-1]) + 10 * tol
        v = check_lyapunov(ll, NONINCREASING, slack) if ll.size > 1 else None
        ok = v is None or v.passed
        report.add("C3_mass_dominates", "compact.mass_dominates", ok,
                   0.0 if v is None else v.violation, slack)
    else:
        report.add("C3_mass_dominates", "compact.mass_dominates", False, math.inf, 0.0,
                   detail="core never entered")

    lam = np.exp(traj.log_lambda[:, 0])
    final = model.flow(state, True).derivative(traj.t[-1], traj.state(-1))
    no_event = not any(name == "lambda_max" for name, _ in traj.events)
    report.add("C4_no_lambda_max_event", "compact.no_escape",
               no_event and final.dlog_lambda[0] <= 0, final.dlog_lambda[0], 0.0)
    report.add("C4_lambda_below_10x", "compact.no_escape", lam.max() <= 10 * lam0,
               lam.max() / lam0, 10.0)
    report.add("C5_twin_diverges", "compact.twin_diverges",
               twin.termination == "event:growth",
               np.exp(twin.log_lambda[-1, 0]) / lam0, float(cfg.scenario("growth")))

    report.measured.update(t_enter_core=t_in, lambda_max_ratio=float(lam.max() / lam0),
                           t_final=float(traj.t[-1]), budget=budget,
                           twin_t_final=float(twin.t[-1]))
    if not integrable:
        report.demote()
    report.trajectory = traj
    report.twin = twin
    _write(report, traj, out_dir, "compactified")
    _write(report, twin, out_dir, "compactified_twin")
    return report


def _bounded_checks(report, model, traj, flow, prefix, anchor, budget):
    lam = np.exp(traj.log_lambda)
    lam0 = lam[0]
    no_event = not any(name == "lambda_max" for name, _ in traj.events)
    growth = float(np.max(np.log(lam.max(axis=0) / lam0)))
    final = flow.derivative(traj.t[-1], traj.state(-1))
    ok = no_event and growth <= budget + 10 * model.tol and np.all(final.dlog_lambda <= 0)
    report.add(f"{prefix}_lambda_bounded", anchor, ok, growth, budget + 10 * model.tol,
               detail=f"final dlog_lambda max {final.dlog_lambda.max():.3g}")


def _events_for(lams, cfg, kernel=None):
    cap = float(cfg.scenario("lambda_max_factor")) * float(np.max(lams))
    lo = float(cfg.scenario("lambda_min"))
    out = [Event("lambda_max", lambda t, st: st.lam.max() - cap, +1),
           Event("lambda_min", lambda t, st: st.lam.min() - lo, -1)]
    if kernel is not None and len(lams) > 1:
        hi = float(cfg.scenario("eps_collision"))
        out.append(Event("collision", lambda t, st: eps_matrix(st, kernel).max() - hi, +1))
    return out


def _run_mixed(cfg, report, out_dir):
    mc = cfg.scenario("mixed")
    model = _Model(cfg)
    lams = np.asarray(mc["lambdas"], dtype=float)
    state = BubbleState(alpha=np.ones(lams.size), log_lambda=np.log(lams),
                        a=np.asarray(mc["centers"], dtype=float), mode=POSITIVE_WEAK_LIMIT,
                        omega=mc["omega"], alpha_global=float(mc["alpha_global"]))
    pert = cfg.pert(direction=+1.0)
    traj = model.run(state, float(mc["t_end"]), pert, _events_for(lams, cfg, model.kernel))
    budget = pert_budget(pert, 0.0, traj.t[-1])
    weights = sum(model.C ** k for k in range(1, state.p + 1))
    slack = weights * budget + 10 * model.tol
    v = check_lyapunov(traj.channel("psi"), NONDECREASING, slack)
    report.add("mixed_psi_nondecreasing", "mixed.psi_monotone", v.passed, v.violation, slack)
    _bounded_checks(report, model, traj, model.flow(state), "mixed", "mixed.lambda_bounded",
                    budget)
    _write(report, traj, out_dir, "exclusions_mixed")
    return traj


def _run_off_max(cfg, report, out_dir):
    oc = cfg.scenario("off_max")
    model = _Model(cfg, extra_bumps=[oc["bump"]])
    rep = validate_condition(model.field, n_samples=2000)
    if not rep.valid or rep.q == 0:
        raise UsageError(f"off_max field violates the curvature condition: {rep.violations}")
    cp = min(rep.critical_points[1:], key=lambda c: c.lapK)
    state = BubbleState.single(float(oc["lambda0"]), cp.x)
    pert = cfg.pert(direction=+1.0)
    traj = model.run(state, float(oc["t_end"]), pert, _events_for(state.lam, cfg))
    budget = pert_budget(pert, 0.0, traj.t[-1])
    series = [psi(s, model.C, [0]) for s in traj.states()]
    slack = model.C * budget + 10 * model.tol
    v = check_lyapunov(series, NONDECREASING, slack)
    report.add("offmax_psi_nondecreasing", "offmax.psi_monotone", v.passed, v.violation, slack,
               detail=f"Laplacian at critical point {cp.lapK:.4g}")
    _bounded_checks(report, model, traj, model.flow(state), "offmax", "offmax.lambda_bounded",
                    budget)
    report.measured["offmax_lapK"] = cp.lapK
    _write(report, traj, out_dir, "exclusions_off_max")
    return traj


def lambda_max_margin(state: BubbleState, field, kernel: GreenKernelModel, coeffs,
                      theta_eps: float) -> float:
    """lambda_m^(12/5) (push - restore) for the largest scale; <= 0 means contraction.

    push bounds the Laplacian term using |a_m|^2 <= (4 eps / lambda_m)^(2/5);
    restore collects the interaction lower bound (n-2)/4 eps_mj and the mass term.
    """
    n = state.n
    lam = state.lam
    m = int(np.argmax(lam))
    lm = lam[m]
    K = np.array([eval_jet(field, a).K for a in state.a])
    push = coeffs.kappa * coeffs.gamma2 * 4 * (n + 2) * (4 * theta_eps) ** 0.4 / (K.min() * lm ** 2.4)
    amin, amax = state.alpha.min(), state.alpha.max()
    inter = sum(eps(state, kernel, m, j) for j in range(state.p) if j != m)
    restore = coeffs.kappa * (coeffs.b_lambda * (amin / amax) * (n - 2) / 4 * inter
                              + coeffs.gamma1 * kernel.H(state.a[m]) / lm ** (n - 2))
    return float(lm ** 2.4 * (push - restore))


def _run_tower(cfg, report, out_dir):
    tc = cfg.scenario("tower")
    model = _Model(cfg)
    lams = np.asarray(tc["lambdas"], dtype=float)
    p, n = lams.size, cfg.n
    a = np.zeros((p, n))
    off = float(tc["offset"])
    a[:, 0] = [off * (-1) ** (k + 1) for k in range(p)]
    state = BubbleState(alpha=np.ones(p), log_lambda=np.log(lams), a=a)
    th_eps = float(tc["theta_eps"])
    pert = cfg.pert(direction=+1.0)
    traj = model.run(state, float(tc["t_end"]), pert, _events_for(lams, cfg, model.kernel),
                     theta_eps=th_eps)
    budget = pert_budget(pert, 0.0, traj.t[-1])
    kstar = measure_kappa_star(model.mconf, n_grid=20001).kappa
    weights = sum(model.C ** k for k in range(1, p + 1))
    slack = weights * kstar * budget + 10 * model.tol * max(1.0, traj.channel("theta").max())

    th = traj.channel("theta")
    v = check_lyapunov(th, NONINCREASING, slack)
    report.add("tower_theta_nonincreasing", "tower.theta_monotone", v.passed, v.violation, slack)
    report.add("tower_theta_bounded", "tower.theta_bounded", th.max() <= th[0] + slack,
               th.max(), th[0] + slack)

    # running integral of the cut-off weighted gradient and interaction terms
    states = traj.states()
    integrand = np.zeros(len(states))
    for k, st in enumerate(states):
        r2 = np.sum(st.a**2, axis=1)
        on = st.lam * r2**2.5 >= 2 * th_eps
        for i in np.nonzero(on)[0]:
            integrand[k] += r2[i] / st.lam[i] ** 2
            integrand[k] += sum(eps(st, model.kernel, i, j) for j in range(p) if j != i)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(traj.t))])
    total = cum[-1]
    half = np.searchsorted(traj.t, traj.t[-1] / 2)
    tail = total - cum[half]
    frac = tail / total if total > 0 else 0.0
    # the integrand is also settled once it has vanished over the last quarter of the run
    nz = np.nonzero(integrand > 0)[0]
    t_last = traj.t[nz[-1]] if nz.size else traj.t[0]
    quiet = (traj.t[-1] - t_last) / traj.t[-1]
    report.add("tower_integrability_proxy", "tower.integrability",
               frac <= 0.05 or (quiet >= 0.25 and total < math.inf), frac, 0.05,
               detail=f"integral {total:.6g}, integrand zero over last {quiet:.1%} of the run")

    margins = [lambda_max_margin(st, model.field, model.kernel, model.coeffs, th_eps)
               for st in states
               if np.all(st.lam * np.sum(st.a**2, axis=1) ** 2.5 <= 4 * th_eps)]
    worst = max(margins) if margins else -math.inf
    report.add("tower_lambda_max_sign", "tower.lambda_max_sign", worst <= 0.0, worst, 0.0,
               detail=f"{len(margins)} sampled states in the contraction region")
    report.measured.update(tower_states_checked=len(margins), tower_integral=total)
    _write(report, traj, out_dir, "exclusions_tower")
    return traj


SUBSCENARIOS = ("mixed", "off_max", "tower")


def run_exclusions(cfg: Optional[Config] = None, sub: str = "all", out_dir=None) -> ScenarioReport:
    """Mixed, off-maximum and tower runs; ``sub`` selects one or ``all``."""
    cfg = cfg or Config()
    subs = SUBSCENARIOS if sub == "all" else (sub,)
    for s in subs:
        if s not in SUBSCENARIOS:
            raise UsageError(f"unknown exclusion scenario {s!r}; expected {SUBSCENARIOS}")
    report = ScenarioReport(f"exclusions:{sub}", cfg.data)
    integrable = _hypothesis_check(report, cfg.pert())
    runners = {"mixed": _run_mixed, "off_max": _run_off_max, "tower": _run_tower}
    report.trajectories = {}
    for s in subs:
        report.trajectories[s] = runners[s](cfg, report, out_dir)
    report.termination = "; ".join(f"{s}:{report.trajectories[s].termination}" for s in subs)
    if not integrable:
        report.demote()
    return report


# randomized batteries

@dataclass
class BatteryResult:
    status: str  # "ok", "violation", "hypothesis unmet" or "degenerate"
    value: float


def _ordered(state: BubbleState) -> bool:
    return bool(np.all(np.diff(state.log_lambda) >= 0))


def _eps_small(state, kernel, limit=0.1) -> bool:
    return all(eps(state, kernel, i, j) <= limit
               for i in range(state.p) for j in range(i + 1, state.p))


def _alpha_ok(state) -> bool:
    r = state.alpha.max() / state.alpha.min()
    return r <= 2.0 + 1e-12


def battery_eij_large(state: BubbleState, kernel: GreenKernelModel, C: float = 10.0,
                      c_req: float = 0.1) -> BatteryResult:
    """Ratio of -sum C^i (a_j/a_i) l_i d_l_i eps_ij to sum_{i>j} C^i eps_ij.

    Hypotheses: 1/lambda_1 >= ... >= 1/lambda_p, alpha ratios in [1/2, 2],
    all eps_ij <= 0.1.
    """
    if not (_ordered(state) and _alpha_ok(state) and _eps_small(state, kernel)):
        return BatteryResult("hypothesis unmet", math.nan)
    p, al = state.p, state.alpha
    lhs = 0.0
    rhs = 0.0
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            lhs -= C ** (i + 1) * al[j] / al[i] * dlog_lambda_eps(state, kernel, i, j)
            if i > j:
                rhs += C ** (i + 1) * eps(state, kernel, i, j)
    if rhs == 0.0:
        return BatteryResult("degenerate", math.nan)
    c = lhs / rhs
    return BatteryResult("ok" if c >= c_req else "violation", c)


def gradient_kernel_constant(kernel: GreenKernelModel, diameter: float = 2.0) -> float:
    """sup |grad g| / sqrt(g) over separations up to ``diameter``."""
    r = np.linspace(1e-6, diameter, 20001)
    n, h0 = kernel.n, kernel.h0
    val = (2 + n * h0 * r ** (n - 2)) / np.sqrt(1 + h0 * r ** (n - 2))
    return float(val.max())


def battery_eij_small(state: BubbleState, kernel: GreenKernelModel, C: float = 10.0,
                      diameter: float = 2.0) -> BatteryResult:
    """Ratio of sum C^i |(1/l_i) grad eps_ij| to sum_{i>j} C^j eps_ij against
    the a-priori constant (n-2)/2 * G * C^(p-1)."""
    if not _ordered(state):
        return BatteryResult("hypothesis unmet", math.nan)
    p, n = state.p, state.n
    lhs = rhs = 0.0
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            lhs += C ** (i + 1) * float(np.linalg.norm(grad_a_eps(state, kernel, i, j)))
            if i > j:
                rhs += C ** (j + 1) * eps(state, kernel, i, j)
    if rhs == 0.0:
        return BatteryResult("ok" if lhs == 0.0 else "violation", 0.0)
    bound = (n - 2) / 2 * gradient_kernel_constant(kernel, diameter) * C ** (p - 1)
    ratio = lhs / rhs
    return BatteryResult("ok" if ratio <= bound else "violation", ratio / bound)


def battery_perturbed_case(state: BubbleState, kernel: GreenKernelModel, theta_eps: float,
                           mconf=None) -> BatteryResult:
    """min over pairs with lambda_i >= lambda_j of
    -theta_i l_i d_l_i eps_ij / (theta_i eps_ij), required >= (n-2)/4.

    Hypothesis: eps_ij <= 0.1 for the pairs tested.
    """
    n, p = state.n, state.p
    if not _eps_small(state, kernel):
        return BatteryResult("hypothesis unmet", math.nan)
    lam = state.lam
    x = lam * np.sum(state.a**2, axis=1) ** 2.5 / theta_eps
    th = vartheta(mconf, np.maximum(x, 1e-300))
    worst = math.inf
    for i in range(p):
        if th[i] == 0.0:
            continue
        for j in range(p):
            if j == i or lam[i] < lam[j]:
                continue
            e = eps(state, kernel, i, j)
            if e == 0.0:
                continue
            worst = min(worst, -th[i] * dlog_lambda_eps(state, kernel, i, j) / (th[i] * e))
    if not math.isfinite(worst):
        return BatteryResult("degenerate", math.nan)
    return BatteryResult("ok" if worst >= (n - 2) / 4 else "violation", worst)


def random_state(rng: np.random.Generator, n: int = 5, p: Optional[int] = None,
                 chart_radius: float = 1.0) -> BubbleState:
    """Random configuration with scales sorted ascending and alpha ratios in [1/2, 2]."""
    p = int(rng.integers(2, 7)) if p is None else p
    log_lam = np.sort(rng.uniform(np.log(10.0), np.log(1e6), p))
    u = rng.standard_normal((p, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    a = u * (chart_radius * rng.random(p) ** (1.0 / n))[:, None]
    alpha = 2.0 ** rng.uniform(-0.5, 0.5, p)
    return BubbleState(alpha=alpha, log_lambda=log_lam, a=a)


def verify_batteries(seed: int = 1, trials: int = 10_000, cfg: Optional[Config] = None,
                     states: Optional[list] = None) -> ScenarioReport:
    """Randomized search for violations of the interaction inequalities."""
    if trials < 1 and states is None:
        raise UsageError("trials must be >= 1")
    cfg = cfg or Config()
    kernel = cfg.kernel()
    C = float(cfg.scenario("C"))
    th_eps = float(cfg.scenario("tower.theta_eps"))
    mconf = cfg.mconf()
    rng = np.random.default_rng(seed)
    report = ScenarioReport("batteries", {"seed": seed, "trials": trials, "C": C})
    if states is None:
        states = [random_state(rng, cfg.n) for _ in range(trials)]
    names = {"eij_large": ("battery.eij_large", battery_eij_large),
             "eij_small": ("battery.eij_small", battery_eij_small),
             "perturbed_case": ("battery.perturbed_case", None)}
    stats = {k: {"ok": 0, "violation": 0, "hypothesis unmet": 0, "degenerate": 0,
                 "min": math.inf, "max": -math.inf, "witness": None} for k in names}
    for st in states:
        scale = 10.0 ** rng.uniform(-1, 1)
        # move centers toward x0 so the cut-off weights are active
        st_pc = BubbleState(alpha=st.alpha, log_lambda=st.log_lambda, a=st.a * 0.1)
        results = {"eij_large": battery_eij_large(st, kernel, C),
                   "eij_small": battery_eij_small(st, kernel, C),
                   "perturbed_case": battery_perturbed_case(st_pc, kernel, th_eps * scale, mconf)}
        for k, res in results.items():
            s = stats[k]
            s[res.status] += 1
            if res.status in ("ok", "violation") and math.isfinite(res.value):
                s["min"] = min(s["min"], res.value)
                s["max"] = max(s["max"], res.value)
            if res.status == "violation" and s["witness"] is None:
                s["witness"] = {"log_lambda": st.log_lambda.tolist(), "a": st.a.tolist(),
                                "alpha": st.alpha.tolist()}
    for k, (anchor, _) in names.items():
        s = stats[k]
        measured = s["max"] if k == "eij_small" else s["min"]
        bound = {"eij_large": 0.1, "eij_small": 1.0, "perturbed_case": (cfg.n - 2) / 4}[k]
        report.add(k, anchor, s["violation"] == 0, measured, bound,
                   detail=f"ok={s['ok']} unmet={s['hypothesis unmet']} "
                          f"degenerate={s['degenerate']} violations={s['violation']}")
        report.measured[k] = s
    ks = measure_kappa_star(mconf)
    report.add("vartheta_kappa_star", "battery.vartheta", ks.kappa <= 2.0, ks.kappa, 2.0)
    report.measured["kappa_star"] = ks._asdict()
    return report
