"""Physical parameters, the Bogoliubov-reduced frame and the sum-rule gate."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """An out-of-range model parameter; ``name`` is the offending field."""

    def __init__(self, name, message):
        super().__init__(message)
        self.name = name


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the extended Dicke Hamiltonian.

    Parameters
    ----------
    omega : float
        Cavity frequency, > 0.
    delta : float
        Atomic transition frequency, > 0.
    lam : float
        Atom-cavity coupling, >= 0.
    omega_aa : float
        Interatomic coupling; negative values are attractive.
    kappa : float
        Strength of the A^2 term, >= 0.
    n_atoms : int
        Number of two-level atoms, >= 1.
    """

    omega: float
    delta: float
    lam: float
    omega_aa: float = 0.0
    kappa: float = 0.0
    n_atoms: int = 1

    def __post_init__(self):
        for name in ("omega", "delta", "lam", "omega_aa", "kappa"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(name, f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega <= 0:
            raise ParameterError("omega", f"omega must be > 0, got {self.omega}")
        if self.delta <= 0:
            raise ParameterError("delta", f"delta must be > 0, got {self.delta}")
        if self.lam < 0:
            raise ParameterError("lam", f"lam must be >= 0, got {self.lam}")
        if self.kappa < 0:
            raise ParameterError("kappa", f"kappa must be >= 0, got {self.kappa}")
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ParameterError("n_atoms", f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    @property
    def j(self) -> float:
        """Total spin of the symmetric Dicke sector."""
        return self.n_atoms / 2

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class EffectiveFrame:
    """Field parameters after the A^2 term is absorbed by a Bogoliubov rotation.

    ``energy_shift`` is the constant separating the two frames:
    ``H_lab = H_eff + energy_shift``.
    """

    gamma_k: float
    omega_k: float
    lambda_k: float
    mu: float
    nu: float
    energy_shift: float


def effective_frame(params: ModelParams) -> EffectiveFrame:
    gamma = math.sqrt(1.0 + 4.0 * params.kappa / params.omega)
    root = math.sqrt(gamma)
    omega_k = params.omega * gamma
    return EffectiveFrame(
        gamma_k=gamma,
        omega_k=omega_k,
        lambda_k=params.lam / root,
        mu=(gamma + 1.0) / (2.0 * root),
        nu=(gamma - 1.0) / (2.0 * root),
        energy_shift=0.5 * (omega_k - params.omega) - params.omega_aa,
    )


def physical_couplings(delta: float, dipole: float, density: float, omega: float):
    """Microscopic coupling and A^2 strength for real atoms.

    Units are hbar = e = m = 1. Returns ``(lam, kappa)`` with
    ``lam = delta * d * sqrt(2 pi / omega) * sqrt(rho)`` and
    ``kappa = pi * rho / omega``. A zero dipole is accepted (it decouples
    the atoms); every other argument must be strictly positive.
    """
    for name, value in (("delta", delta), ("density", density), ("omega", omega)):
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    if not math.isfinite(dipole) or dipole < 0:
        raise ValueError(f"dipole must be non-negative, got {dipole}")
    field = 2.0 * math.pi / omega
    lam = delta * dipole * math.sqrt(field) * math.sqrt(density)
    kappa = 0.5 * field * density
    return lam, kappa


def trk_bound(params: ModelParams) -> float:
    """Largest coupling compatible with the oscillator-strength sum rule."""
    return math.sqrt(params.delta * params.kappa)


def trk_allowed(params: ModelParams) -> bool:
    return params.lam * params.lam < params.delta * params.kappa
