"""Reduced shadow-flow simulator for bubble concentration in prescribed
scalar curvature flows."""
from .coefficients import CoefficientSet, bubble_constant, make_coefficients
from .config import Config
from .curvature import Bump, CurvatureField, eval_jet, pure_quartic, validate_condition, with_bumps
from .diagnostics import check_lyapunov, mass_scale_invariant, psi, theta
from .dynamics import (ShadowFlow, StateDerivative, equilibrium_alpha, rhs_positive_weak_limit,
                       rhs_zero_weak_limit, sigma_leading)
from .errors import (ConsistencyError, DomainError, PrecisionError, RhsError, ShadowFlowError,
                     StiffnessError, UsageError)
from .integrator import Event, PerturbationModel, Trajectory, integrate, pert_budget
from .interaction import BubbleState, GreenKernelModel, dlog_lambda_eps, eps, grad_a_eps
from .modification import ModificationConfig, cutoffs, rhs_modified, vartheta
from .scenarios import (ScenarioReport, run_compactified, run_divergence, run_exclusions,
                        verify_batteries)

__version__ = "0.1.0"

__all__ = [
    "CoefficientSet",
    "bubble_constant",
    "make_coefficients",
    "Config",
    "Bump",
    "CurvatureField",
    "eval_jet",
    "pure_quartic",
    "validate_condition",
    "with_bumps",
    "check_lyapunov",
    "mass_scale_invariant",
    "psi",
    "theta",
    "ShadowFlow",
    "StateDerivative",
    "equilibrium_alpha",
    "rhs_positive_weak_limit",
    "rhs_zero_weak_limit",
    "sigma_leading",
    "ConsistencyError",
    "DomainError",
    "PrecisionError",
    "RhsError",
    "ShadowFlowError",
    "StiffnessError",
    "UsageError",
    "Event",
    "PerturbationModel",
    "Trajectory",
    "integrate",
    "pert_budget",
    "BubbleState",
    "GreenKernelModel",
    "dlog_lambda_eps",
    "eps",
    "grad_a_eps",
    "ModificationConfig",
    "cutoffs",
    "rhs_modified",
    "vartheta",
    "ScenarioReport",
    "run_compactified",
    "run_divergence",
    "run_exclusions",
    "verify_batteries",
]
