"""Radially symmetric solver for the truncated time-fractional problem."""

from .comparison import PdeComparisonReport, pde_comparison_check
from .eigen import EigenResult, eigen_first, positive_profile_x, profile_residual, rayleigh_quotient
from .grid import (
    RadialGrid,
    default_sigma,
    divergence,
    flux,
    gradient,
    p_energy,
    p_laplacian_radial,
)
from .solver import (
    BlowupVerdict,
    PdeProblem,
    PdeState,
    RunReport,
    StepDivergence,
    Thresholds,
    blowup_detect,
    initial_state,
    scheme_residual,
    smooth_bump,
    solve,
    step,
    stiffness_apply,
)
from .subsolution import SeparableSubsolution, auto_eps_scale, separable_subsolution

__all__ = [
    "BlowupVerdict",
    "EigenResult",
    "PdeComparisonReport",
    "PdeProblem",
    "PdeState",
    "RadialGrid",
    "RunReport",
    "SeparableSubsolution",
    "StepDivergence",
    "Thresholds",
    "auto_eps_scale",
    "blowup_detect",
    "default_sigma",
    "divergence",
    "eigen_first",
    "flux",
    "gradient",
    "initial_state",
    "p_energy",
    "p_laplacian_radial",
    "pde_comparison_check",
    "positive_profile_x",
    "profile_residual",
    "rayleigh_quotient",
    "scheme_residual",
    "separable_subsolution",
    "smooth_bump",
    "solve",
    "step",
    "stiffness_apply",
]
