import json
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from shadowflow import (BubbleState, ConsistencyError, ScenarioReport, UsageError,
                        run_compactified, run_divergence, run_exclusions, verify_batteries)
from shadowflow.scenarios import (ANCHORS, battery_eij_large, battery_eij_small,
                                  battery_perturbed_case, lambda_max_margin, random_state)

N = 5
E1 = np.eye(N)[0]


@pytest.fixture(scope="module")
def divergence():
    return run_divergence()


@pytest.fixture(scope="module")
def compactified():
    return run_compactified()


@pytest.fixture(scope="module")
def exclusions():
    return run_exclusions()


def _reduced_divergence(cfg, rtol):
    """Single bubble on the ray through x0 as an ODE in (|a|^2, ln lambda)."""
    c = cfg.coeffs()
    h0, k = cfg.kernel().h0, c.kappa

    def f(t, y):
        u, L = y
        lam, K = math.exp(L), 1 - u * u
        dL = -k * (c.gamma1 * h0 / lam**3 - 28 * c.gamma2 * u / (K * lam**2))
        du = -2 * k / (K * lam**2) * (4 * c.gamma3 * u * u + 56 * c.gamma_nabla_lap * u / lam**2)
        return [du, dL]
    lam0 = cfg.scenario("lambda0")
    target = math.log(cfg.scenario("growth") * lam0)
    ev = lambda t, y: y[1] - target
    ev.terminal, ev.direction = True, 1
    return solve_ivp(f, (0, 1e15), [cfg.scenario("a0") ** 2, math.log(lam0)], method="DOP853",
                     rtol=rtol, atol=1e-16, events=ev, dense_output=True)


def test_divergence_default_passes(divergence):
    r = divergence
    assert r.passed and r.termination == "event:growth"
    assert [c.name for c in r.checks if not c.informational] == [
        "D1_lambda_cubed_over_t", "D2_center_halved", "D2_center_monotone", "D3_regime_kept",
        "D3_regime_kept_0.9", "D4_mass_invariant"]
    assert r.measured["lambda_growth"] == pytest.approx(10.0)


def test_divergence_matches_reduced_system(divergence, cfg):
    ref = _reduced_divergence(cfg, rtol=0.1 * cfg.get("integrator.tol"))
    tr = divergence.trajectory
    assert tr.t[-1] == pytest.approx(ref.t[-1], rel=1e-6)
    y = ref.sol(tr.t)
    np.testing.assert_allclose(tr.log_lambda[:, 0], y[1], atol=1e-6)
    np.testing.assert_allclose(np.sum(tr.a[:, 0] ** 2, axis=1), y[0], rtol=1e-6)
    # lambda^3/t from the oracle over the last half agrees with the simulator
    t = ref.t[-1]
    ts = np.linspace(t / 2, t, 50)
    ratio = np.exp(3 * ref.sol(ts)[1]) / ts
    assert divergence.measured["lambda_cubed_over_t"] == pytest.approx(ratio.mean(), rel=0.02)
    assert (ratio.max() - ratio.min()) / ratio.mean() < 0.1


def test_divergence_tolerance_halving(cfg):
    tol = cfg.get("integrator.tol")
    t_at = {k: run_divergence(cfg.set("integrator.tol", tol / k)).measured["t_final"]
            for k in (1, 2, 100)}
    err = {k: abs(t_at[k] - t_at[100]) / t_at[100] for k in (1, 2)}
    assert err[1] < 4 * tol and err[2] < 4 * tol / 2
    # the global error is proportional to the tolerance
    assert 1.5 < err[1] / err[2] < 3.0


def test_divergence_adversarial_exp_decay(cfg):
    r = run_divergence(cfg.set("integrator.perturbation", {"family": "exp_decay", "c": 0.1}))
    assert r.passed
    d4 = r.check("D4_mass_invariant")
    # the push on ln lambda is spent entirely against the invariant, within the budget
    assert d4.measured <= d4.bound and d4.measured > 0.09
    assert r.measured["budget"] == pytest.approx(0.1, rel=1e-9)


def test_divergence_nonintegrable_demotes(cfg):
    r = run_divergence(cfg.set("integrator.perturbation", {"family": "nonintegrable", "c": 0.5}))
    h = r.check("integrable_error")
    assert h.detail == "hypothesis int pert < inf violated"
    assert all(c.informational for c in r.checks)
    assert r.measured["hypotheses_met"] is False


@pytest.mark.parametrize("key,value,word", [("scenario.a0", 0.06, "|a0| <= eps0"),
                                            ("scenario.lambda0", 5e3, "lambda0 |a0|^2")])
def test_divergence_hypotheses_enforced(cfg, key, value, word):
    for runner in (run_divergence, run_compactified):
        with pytest.raises(UsageError, match="hypothesis") as info:
            runner(cfg.set(key, value))
        assert word in str(info.value)


def test_compactified_default_passes(compactified):
    r = compactified
    assert r.passed
    assert r.measured["lambda_max_ratio"] < 10
    assert r.check("C2_enters_core").measured < r.measured["t_final"]
    assert r.twin.termination == "event:growth"


def test_paired_run_reproducibility(divergence, compactified):
    assert np.array_equal(divergence.trajectory.t, compactified.twin.t)
    assert np.array_equal(divergence.trajectory.y, compactified.twin.y)


def test_compactified_adversarial(cfg):
    r = run_compactified(cfg.set("integrator.perturbation", {"family": "exp_decay", "c": 0.1}))
    assert r.passed


def test_gamma4_to_zero_reverts(cfg):
    r = run_compactified(cfg.set("coefficients.gamma4", 1e-12))
    assert not r.passed
    assert not r.check("C2_enters_core").passed
    assert r.check("C4_lambda_below_10x").measured > 10
    lam = np.exp(r.trajectory.log_lambda[:, 0])
    assert np.all(np.diff(lam[len(lam) // 2:]) > 0)


def test_mixed_closed_form(cfg):
    lam0, om, ag = 1e3, 0.7, 1.3
    c = cfg.set("scenario.mixed", {"lambdas": [lam0], "centers": [[0.0] * N], "omega": [om],
                                   "alpha_global": ag, "t_end": 1e4})
    r = run_exclusions(c, "mixed")
    assert r.passed
    tr = r.trajectories["mixed"]
    co = c.coeffs()
    alpha = tr.alpha[0, 0]
    rate = 1.5 * co.kappa * co.gamma1 * ag * om / alpha
    lam = np.exp(tr.log_lambda[:, 0])
    # compare arrival times: lambda itself is ill-conditioned near the collapse
    t_exact = (lam0**1.5 - lam**1.5) / rate
    assert np.max(np.abs(tr.t - t_exact)) < 1e-6 * lam0**1.5 / rate
    assert tr.t[-1] == pytest.approx((lam0**1.5 - 10.0**1.5) / rate, rel=1e-7)
    assert np.all(np.diff(tr.log_lambda[:, 0]) < 0)
    assert np.all(np.diff(tr.channel("psi")) > 0)


def test_exclusions_default_pass(exclusions):
    r = exclusions
    assert r.passed
    assert set(r.trajectories) == {"mixed", "off_max", "tower"}
    assert r.measured["offmax_lapK"] == pytest.approx(4.0, abs=0.05)
    assert r.measured["tower_states_checked"] > 0


def test_exclusions_single_sub_and_unknown(cfg):
    r = run_exclusions(cfg, "off_max")
    assert r.name == "exclusions:off_max" and r.passed
    assert {c.name.split("_")[0] for c in r.checks if not c.informational} == {"offmax"}
    with pytest.raises(UsageError):
        run_exclusions(cfg, "spiral")


def test_off_max_rejects_invalid_field(cfg):
    hill = {"center": [0.2, 0.2, 0.6, 0, 0], "amplitude": 0.3, "width": 0.3}
    with pytest.raises(UsageError, match="curvature condition"):
        run_exclusions(cfg.set("scenario.off_max.bump", hill), "off_max")


def test_lambda_max_margin_sign(field, kernel, coeffs):
    # a strong interaction with the smaller bubble makes the largest scale contract
    s = BubbleState(alpha=[1.0, 1.0], log_lambda=np.log([1e3, 1e4]),
                    a=[1e-3 * E1, -1e-3 * E1])
    assert lambda_max_margin(s, field, kernel, coeffs, 1e-3) < 0
    # far apart the interaction is negligible and a large threshold lets the push win
    far = s.copy(a=np.array([0.3 * E1, -0.3 * E1]))
    assert lambda_max_margin(far, field, kernel, coeffs, 1e-3) < lambda_max_margin(
        far, field, kernel, coeffs, 1e3)
    assert lambda_max_margin(far, field, kernel, coeffs, 1e3) > 0


def test_report_anchor_validation():
    r = ScenarioReport("x", {})
    r.add("ok", "tower.theta_bounded", True, 0.0, 1.0)
    assert r.passed
    r.add("stray", "made.up", True, 0.0, 1.0)
    with pytest.raises(ConsistencyError):
        r.passed
    assert all(isinstance(v, str) for v in ANCHORS.values())


def test_report_json_roundtrip(divergence):
    d = json.loads(divergence.to_json())
    assert d["name"] == "divergence" and d["passed"] is True
    assert {c["name"] for c in d["checks"]} == {c.name for c in divergence.checks}
    assert d["config"]["scenario"]["lambda0"] == 1e4


def test_every_check_is_anchored(divergence, compactified, exclusions):
    for r in (divergence, compactified, exclusions):
        assert all(c.anchor in ANCHORS for c in r.checks)


def test_batteries_small_run():
    r = verify_batteries(seed=1, trials=300)
    assert r.passed
    for k in ("eij_large", "eij_small", "perturbed_case"):
        assert r.measured[k]["violation"] == 0
        assert r.measured[k]["ok"] > 0
    assert r.check("vartheta_kappa_star").measured == pytest.approx(16 / 9, rel=1e-6)


def test_batteries_need_a_trial():
    with pytest.raises(UsageError):
        verify_batteries(trials=0)


def test_battery_equal_bubbles(kernel):
    # coincident equal bubbles have eps = 1/2^(3/2) > 0.1: outside the hypotheses
    s = BubbleState(alpha=[1.0, 1.0], log_lambda=np.log([100.0, 100.0]), a=[0.01 * E1] * 2)
    assert battery_eij_large(s, kernel).status == "hypothesis unmet"
    assert battery_perturbed_case(s, kernel, 1e-3).status == "hypothesis unmet"
    assert battery_eij_small(s, kernel).status == "ok"
    r = verify_batteries(trials=1, states=[s])
    assert r.passed and r.measured["eij_large"]["hypothesis unmet"] == 1


def test_battery_equal_far_bubbles(kernel):
    s = BubbleState(alpha=[1.0, 1.0], log_lambda=np.log([100.0, 100.0]),
                    a=[0.5 * E1, -0.5 * E1])
    res = battery_eij_large(s, kernel)
    assert res.status == "ok" and res.value > 0.1


def test_battery_wrong_ordering(kernel, rng):
    s = random_state(rng, N, p=3)
    rev = BubbleState(alpha=s.alpha[::-1], log_lambda=s.log_lambda[::-1], a=s.a[::-1])
    assert battery_eij_large(rev, kernel).status == "hypothesis unmet"
    assert battery_eij_small(rev, kernel).status == "hypothesis unmet"


def test_random_state_layout(rng):
    for _ in range(100):
        s = random_state(rng, N)
        assert 2 <= s.p <= 6
        assert np.all(np.diff(s.log_lambda) >= 0)
        assert np.all(np.linalg.norm(s.a, axis=1) <= 1.0)
        assert s.alpha.max() / s.alpha.min() <= 2.0
        assert np.all((s.lam >= 10) & (s.lam <= 1e6))


def test_output_files(tmp_path, cfg):
    r = run_divergence(cfg, out_dir=tmp_path)
    assert r.files == [str(tmp_path / "divergence.csv")]
    head = open(r.files[0]).readline().strip().split(",")
    assert head[:2] == ["t", "ln_lambda_0"] and "neg_lam_lapK_0" in head
    assert not math.isnan(float(open(r.files[0]).readlines()[-1].split(",")[1]))
