"""Run configuration: TOML file with sections field, kernel, coefficients,
modification, integrator and scenario, deep-merged over the defaults."""
from __future__ import annotations

import copy
import json
import sys
from typing import Any, Optional

import numpy as np

from .coefficients import make_coefficients
from .curvature import Bump, CurvatureField
from .errors import UsageError
from .integrator import PerturbationModel
from .interaction import GreenKernelModel
from .modification import ModificationConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# dip whose saddle has Laplacian close to +4
OFF_MAX_BUMP = {"center": [0.6, 0.0, 0.0, 0.0, 0.0], "amplitude": -0.214, "width": 0.2}

DEFAULTS: dict = {
    "field": {"n": 5, "chart_radius": 1.0, "bumps": []},
    "kernel": {"h0": 0.5},
    "coefficients": {},
    "modification": {"eps_strength": 0.1, "eps_inner": 0.005, "a_radius": None},
    "integrator": {
        "tol": 1e-8,
        "wall_time": 60.0,
        "max_steps": 200000,
        "perturbation": {"family": "off", "c": 0.0, "beta": 1.0, "s": 1.0,
                         "sign": "adversarial", "seed": 0, "channels": ["log_lambda"]},
    },
    "scenario": {
        "lambda0": 1e4,
        "a0": 0.05,
        "eps0": 0.05,
        "growth": 10.0,
        "lambda_max_factor": 1e3,
        "lambda_min": 10.0,
        "eps_collision": 0.1,
        "C": 10.0,
        "budget_C": 2.0,
        "alpha_mode": "slaved",
        "mixed": {"lambdas": [1e3, 3e3], "centers": [[0, 0, 0, 0, 0], [0, 0.2, 0, 0, 0]],
                  "omega": [1.0, 1.0], "alpha_global": 1.0, "t_end": 1e9},
        "off_max": {"bump": OFF_MAX_BUMP, "lambda0": 1e3, "t_end": 1e9},
        "tower": {"lambdas": [1e3, 1e4], "offset": 0.05, "theta_eps": 1e-3, "t_end": 1e7},
    },
}


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and out[k]:
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(over: dict, base: dict, path: str = "") -> None:
    for k, v in over.items():
        if k not in base:
            raise UsageError(f"unknown config key {path + k!r}")
        # empty default dicts (coefficient overrides) are open-ended
        if isinstance(v, dict) and isinstance(base[k], dict) and base[k]:
            _check_keys(v, base[k], f"{path}{k}.")


class Config:
    """Merged configuration with builders for the model objects."""

    def __init__(self, data: Optional[dict] = None):
        data = data or {}
        _check_keys(data, DEFAULTS)
        self.data = deep_merge(DEFAULTS, data)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, "rb") as fh:
            try:
                return cls(tomllib.load(fh))
            except tomllib.TOMLDecodeError as exc:
                raise UsageError(f"cannot parse config {path}: {exc}") from exc

    def copy(self) -> "Config":
        return Config(copy.deepcopy(self.data))

    def get(self, key: str) -> Any:
        node = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                raise UsageError(f"unknown config key {key!r}")
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> "Config":
        """Return a copy with the dotted ``key`` replaced (dicts are merged)."""
        parts = key.split(".")
        over: Any = value
        for part in reversed(parts):
            over = {part: over}
        return Config(deep_merge(self.data, over))

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, default=float)

    # builders
    @property
    def n(self) -> int:
        return int(self.data["field"]["n"])

    def field(self, extra_bumps=()) -> CurvatureField:
        f = self.data["field"]
        bumps = [Bump(np.asarray(b["center"], dtype=float), float(b["amplitude"]),
                      float(b["width"])) for b in list(f["bumps"]) + list(extra_bumps)]
        return CurvatureField(n=self.n, bumps=tuple(bumps), chart_radius=float(f["chart_radius"]))

    def kernel(self) -> GreenKernelModel:
        return GreenKernelModel(n=self.n, h0=float(self.data["kernel"]["h0"]))

    def coeffs(self):
        return make_coefficients(self.n, self.data["coefficients"])

    def mconf(self) -> ModificationConfig:
        m = self.data["modification"]
        return ModificationConfig(eps_strength=float(m["eps_strength"]),
                                  eps_inner=float(m["eps_inner"]), a_radius=m.get("a_radius"))

    def pert(self, direction: float = -1.0) -> PerturbationModel:
        p = dict(self.data["integrator"]["perturbation"])
        return PerturbationModel(family=p["family"], c=float(p["c"]), beta=float(p["beta"]),
                                 s=float(p["s"]), sign=p["sign"], direction=direction,
                                 seed=int(p["seed"]), channels=tuple(p["channels"]))

    def scenario(self, key: str) -> Any:
        return self.get(f"scenario.{key}")
