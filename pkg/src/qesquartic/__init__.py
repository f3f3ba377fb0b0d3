"""Quasi-exact solvability of the PT-symmetric quartic oscillator with a Coulomb and centrifugal core."""
from .core import (
    CertificationError,
    DegeneratePivot,
    DomainError,
    InternalParameters,
    ModelParameters,
    NoConvergence,
    QESSolution,
    SingularJacobian,
    bbl_parameters,
    d_coupling,
    internal_from_model,
    model_from_internal,
)
from .magyari import MagyariSystem, assemble, entry, forward_eliminate, pivoted_kernel, residual_report
from .asymptotic import AsymptoticMultiplet, asymptotic_spectrum, multiplets, omega_from_h, rescaled_matrix
from .solver import eigen_E, eigen_F, fixed_point_search, newton_polish, solve_all, sweep

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "DegeneratePivot",
    "DomainError",
    "InternalParameters",
    "ModelParameters",
    "NoConvergence",
    "QESSolution",
    "SingularJacobian",
    "bbl_parameters",
    "d_coupling",
    "internal_from_model",
    "model_from_internal",
    "MagyariSystem",
    "assemble",
    "entry",
    "forward_eliminate",
    "pivoted_kernel",
    "residual_report",
    "AsymptoticMultiplet",
    "asymptotic_spectrum",
    "multiplets",
    "omega_from_h",
    "rescaled_matrix",
    "eigen_E",
    "eigen_F",
    "fixed_point_search",
    "newton_polish",
    "solve_all",
    "sweep",
]
