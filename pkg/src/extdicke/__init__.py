"""Extended Dicke model: cavity, N two-level atoms, interatomic coupling and A^2 term."""

__version__ = "0.1.0"

from .model import ModelParams, ParameterError, EffectiveFrame, effective_frame, physical_couplings, trk_allowed
from .meanfield import (
    MeanFieldSolution,
    Phase,
    TransitionWindow,
    critical_coupling,
    kappa_threshold,
    minimize,
    transition_window,
)
from .hamiltonian import BasisKind, build_displaced, build_plain_fock, parity_operator
from .eigensolve import converge_truncation, lowest_eigenpairs
from .observables import finite_size_critical, report, second_derivative_e0

__all__ = [
    "BasisKind", "EffectiveFrame", "MeanFieldSolution", "ModelParams", "ParameterError", "Phase",
    "TransitionWindow", "build_displaced", "build_plain_fock", "converge_truncation",
    "critical_coupling", "effective_frame", "finite_size_critical", "kappa_threshold",
    "lowest_eigenpairs", "minimize", "parity_operator", "physical_couplings", "report",
    "second_derivative_e0", "transition_window", "trk_allowed",
]
