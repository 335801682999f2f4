"""Command line entry point ``shadowflow``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .coefficients import KINDS, SUPPORTED_N, bubble_constant_beta, bubble_constant_with_error
from .config import Config
from .errors import ShadowFlowError
from .quadverify import BubbleSpec, scale_separated_pair, verify_constant, verify_interaction
from .scenarios import (SUBSCENARIOS, ScenarioReport, run_compactified, run_divergence,
                        run_exclusions, verify_batteries)

SCENARIOS = ("divergence", "compactified", "exclusions") + SUBSCENARIOS


def _load(args) -> Config:
    cfg = Config.load(args.config) if getattr(args, "config", None) else Config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.set("integrator.perturbation.seed", int(args.seed))
    return cfg


def run_scenario(name: str, cfg: Config, modified: bool = False, out_dir=None) -> ScenarioReport:
    if name == "divergence":
        return run_compactified(cfg, out_dir) if modified else run_divergence(cfg, out_dir)
    if name == "compactified":
        return run_compactified(cfg, out_dir)
    if name == "exclusions":
        return run_exclusions(cfg, "all", out_dir)
    if name in SUBSCENARIOS:
        return run_exclusions(cfg, name, out_dir)
    raise ShadowFlowError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


def _emit(report: ScenarioReport, out_dir) -> None:
    text = report.to_json()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{report.name.replace(':', '_')}_summary.json")
        with open(path, "w") as fh:
            fh.write(text)
    for c in report.checks:
        tag = "info" if c.informational else ("PASS" if c.passed else "FAIL")
        print(f"[{tag}] {c.name}: measured={c.measured:.6g} bound={c.bound:.6g} {c.detail}")
    print(f"{report.name}: {'PASS' if report.passed else 'FAIL'} ({report.termination})")


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_scenario(args.scenario, cfg, args.modified, args.out)
    _emit(report, args.out)
    return 0 if report.passed else 1


def cmd_verify(args) -> int:
    report = verify_batteries(seed=args.seed, trials=args.trials, cfg=_load_plain(args))
    if args.interactions:
        n = 5
        cases = {"separated": (BubbleSpec(np.zeros(n), 100.0),
                               BubbleSpec(np.eye(n)[0], 100.0)),
                 "scale_separated": scale_separated_pair(0.01, 100.0, n)}
        for name, (bi, bj) in sorted(cases.items()):
            est, ratio = verify_interaction(bi, bj, n, args.samples, args.seed)
            report.measured[f"interaction_{name}"] = {"value": est.value, "stderr": est.stderr,
                                                      "ratio": ratio}
            print(f"interaction {name}: ratio={ratio:.4f} (rel. s.e. {est.rel_err:.2g})")
    _emit(report, args.out)
    return 0 if report.passed else 1


def _load_plain(args) -> Config:
    return Config.load(args.config) if args.config else Config()


def cmd_constants(args) -> int:
    for n in ([args.n] if args.n else SUPPORTED_N):
        for kind in KINDS:
            q = bubble_constant_with_error(kind, n)
            line = (f"n={n} {kind}: quadrature={q.value:.12f} (+-{q.abserr:.1e}) "
                    f"beta={bubble_constant_beta(kind, n):.12f}")
            if args.mc:
                e = verify_constant(kind, n, args.mc, args.seed)
                line += f" mc={e.value:.6f}+-{e.stderr:.1e}"
            print(line)
    return 0


def parse_grid(spec: str) -> list:
    """``a,b,c`` or ``lin:a:b:num`` or ``log:a:b:num``."""
    if spec.startswith(("lin:", "log:")):
        kind, a, b, num = spec.split(":")
        f = np.linspace if kind == "lin" else np.geomspace
        return [float(v) for v in f(float(a), float(b), int(num))]
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        try:
            out.append(int(tok))
        except ValueError:
            out.append(float(tok))
    return out


def cmd_sweep(args) -> int:
    base = _load(args)
    grid = parse_grid(args.grid)

    def one(value):
        cfg = base.set(args.param, value)
        out = os.path.join(args.out, f"{args.param}={value}") if args.out else None
        rep = run_scenario(args.scenario, cfg, args.modified, out)
        return value, rep

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(one, grid))
    merged = {str(v): {"passed": r.passed, "termination": r.termination,
                       "checks": {c.name: c.passed for c in r.checks}}
              for v, r in sorted(results, key=lambda vr: vr[0])}
    # results stay in ascending grid order
    text = json.dumps({"param": args.param, "scenario": args.scenario, "results": merged},
                      indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "sweep.json"), "w") as fh:
            fh.write(text)
    print(text)
    return 0 if all(r.passed for _, r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shadowflow",
                                 description="Reduced bubble-flow simulator and checks")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a canned scenario")
    r.add_argument("scenario", choices=SCENARIOS)
    r.add_argument("--config", help="TOML config file")
    r.add_argument("--modified", action="store_true", help="use the modified field")
    r.add_argument("--seed", type=int, default=None, help="perturbation sign seed")
    r.add_argument("--out", help="output directory for CSV and JSON")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="randomized inequality batteries")
    v.add_argument("--trials", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--config")
    v.add_argument("--interactions", action="store_true",
                   help="also run the Monte-Carlo interaction estimates")
    v.add_argument("--samples", type=int, default=10**7)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("constants", help="print bubble constants")
    c.add_argument("--n", type=int, choices=SUPPORTED_N)
    c.add_argument("--mc", type=int, default=0, help="also estimate by Monte Carlo")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_constants)

    s = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    s.add_argument("--param", required=True, help="dotted config key, e.g. coefficients.gamma4")
    s.add_argument("--grid", required=True, help="a,b,c or lin:a:b:num or log:a:b:num")
    s.add_argument("--scenario", default="divergence", choices=SCENARIOS)
    s.add_argument("--config")
    s.add_argument("--modified", action="store_true")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=4)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ShadowFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
