"""Thermodynamic-limit analysis of the extended Dicke model.

The Holstein-Primakoff energy per atom is

    e(alpha, beta) = w alpha^2 + D (beta^2 - 1/2) - 4 l alpha beta sqrt(1 - beta^2)
                     - 2 W (beta^2 - 1/2)^2 + W / 2

with ``w, l`` the Bogoliubov-reduced cavity frequency and coupling, ``D`` the
atomic splitting and ``W`` the interatomic coupling. Eliminating ``alpha``
leaves a quadratic in ``x = beta^2`` that is minimised in closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import ModelParams, effective_frame, trk_bound

# relative slack under which lambda_c and the sum-rule bound count as touching
TANGENCY_RTOL = 1e-12


class WindowCollapsed(ValueError):
    """Raised when delta + 2*omega_aa <= 0 leaves no normal-phase boundary."""


class Phase(str, enum.Enum):
    NORMAL = "normal"
    SUPERRADIANT = "superradiant"


@dataclass(frozen=True)
class MeanFieldSolution:
    alpha: float
    beta: float
    x: float
    energy_per_atom: float
    phase: Phase


@dataclass(frozen=True)
class TransitionWindow:
    lambda_c: float
    lambda_star: float
    kappa_c: float
    nonempty: bool


def energy_per_atom(params: ModelParams, alpha: float, beta: float) -> float:
    if abs(beta) > 1.0:
        raise ValueError(f"|beta| must be <= 1, got {beta}")
    fr = effective_frame(params)
    d, w = params.delta, params.omega_aa
    b2 = beta * beta
    return (
        fr.omega_k * alpha * alpha
        + d * (b2 - 0.5)
        - 4.0 * fr.lambda_k * alpha * beta * math.sqrt(1.0 - b2)
        - 2.0 * w * (b2 - 0.5) ** 2
        + 0.5 * w
    )


def energy_gradient(params: ModelParams, alpha: float, beta: float) -> tuple[float, float]:
    """Analytic ``(de/dalpha, de/dbeta)`` for ``|beta| < 1``."""
    fr = effective_frame(params)
    d, w = params.delta, params.omega_aa
    b2 = beta * beta
    s = math.sqrt(1.0 - b2)
    de_da = 2.0 * fr.omega_k * alpha - 4.0 * fr.lambda_k * beta * s
    de_db = (
        2.0 * d * beta
        - 4.0 * fr.lambda_k * alpha * (s - b2 / s)
        - 8.0 * w * (b2 - 0.5) * beta
    )
    return de_da, de_db


def reduced_coefficients(params: ModelParams) -> tuple[float, float, float]:
    """Coefficients ``(e0, a1, a2)`` of ``min_alpha e = e0 + a1 x + a2 x^2``."""
    fr = effective_frame(params)
    c = 4.0 * fr.lambda_k ** 2 / fr.omega_k
    return -0.5 * params.delta, params.delta + 2.0 * params.omega_aa - c, c - 2.0 * params.omega_aa


def minimize(params: ModelParams) -> MeanFieldSolution:
    e0, a1, a2 = reduced_coefficients(params)

    def e(x):
        return e0 + a1 * x + a2 * x * x

    if a2 > 0:
        x = min(max(-a1 / (2.0 * a2), 0.0), 1.0)
    else:
        # concave or linear: the minimum sits on an endpoint, ties go to x = 0
        x = 1.0 if e(1.0) < e(0.0) else 0.0
    fr = effective_frame(params)
    beta = math.sqrt(x)
    alpha = 2.0 * fr.lambda_k * beta * math.sqrt(1.0 - x) / fr.omega_k
    phase = Phase.SUPERRADIANT if x > 0 else Phase.NORMAL
    return MeanFieldSolution(alpha=alpha, beta=beta, x=x, energy_per_atom=e(x), phase=phase)


def critical_coupling(params: ModelParams) -> float:
    s = params.delta + 2.0 * params.omega_aa
    if s <= 0:
        raise WindowCollapsed(
            f"delta + 2*omega_aa = {s} <= 0: no normal phase, window collapsed"
        )
    return math.sqrt(s * (params.omega + 4.0 * params.kappa)) / 2.0


def kappa_threshold(params: ModelParams) -> float:
    w = params.omega_aa
    if not -params.delta / 2.0 < w < 0.0:
        raise ValueError(
            f"kappa threshold needs -delta/2 < omega_aa < 0, got omega_aa={w}"
        )
    return params.omega / 4.0 * (params.delta / (2.0 * abs(w)) - 1.0)


def transition_window(params: ModelParams) -> TransitionWindow:
    lam_star = trk_bound(params)
    try:
        lam_c = critical_coupling(params)
    except WindowCollapsed:
        return TransitionWindow(math.nan, lam_star, math.nan, False)
    try:
        kappa_c = kappa_threshold(params)
    except ValueError:
        kappa_c = math.nan
    nonempty = lam_star - lam_c > TANGENCY_RTOL * max(lam_star, lam_c)
    return TransitionWindow(lam_c, lam_star, kappa_c, nonempty)
