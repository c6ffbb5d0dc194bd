"""Quantities derived from converged ground states."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import (
    DEFAULT_TOL,
    ConvergedResult,
    default_n_start,
    converge_truncation,
    solve_fixed,
)
from .hamiltonian import BasisKind, BasisSpec, SpinSector, parity_operator, spin_ladder
from .meanfield import critical_coupling
from .model import ModelParams, effective_frame

# second differences amplify energy noise by 1/h^2
DERIVATIVE_E_TOL = 1e-10
DEFAULT_STEP_FRACTION = 1e-3


class BracketError(RuntimeError):
    """The minimum of the curvature curve sits on the edge of the grid."""

    def __init__(self, message, curve):
        super().__init__(message)
        self.curve = curve


@dataclass(frozen=True)
class GroundStateReport:
    e0_per_atom: float
    e0_shifted_per_atom: float
    photon_density: float
    jz_order: float
    gap: float
    parity: float | None
    n_max_used: int


def _blocks(vec: np.ndarray, basis: BasisSpec) -> np.ndarray:
    return np.asarray(vec).reshape(basis.spin.dim, basis.n_boson)


def _hop(c: np.ndarray) -> np.ndarray:
    """Per spin block, <c| (B^+ + B) |c> for the block's own ladder operator B."""
    if c.shape[1] < 2:
        return np.zeros(c.shape[0])
    s = np.sqrt(np.arange(1, c.shape[1]))
    return 2.0 * np.sum(c[:, 1:] * c[:, :-1] * s, axis=1)


def _displacements(basis: BasisSpec) -> np.ndarray:
    if basis.kind is BasisKind.DISPLACED:
        return np.asarray(basis.displacements)
    return np.zeros(basis.spin.dim)


def photon_number(vec: np.ndarray, basis: BasisSpec) -> float:
    """<b^+ b>; in a displaced block ``b = A_m - g_m``."""
    c = _blocks(vec, basis)
    g = _displacements(basis)
    n = np.arange(basis.n_boson)
    w = c * c
    return float(np.sum(w * n) + np.sum(g * g * w.sum(axis=1)) - np.sum(g * _hop(c)))


def field_spin_correlator(vec: np.ndarray, basis: BasisSpec) -> float:
    """<(b^+ + b) J_z>."""
    c = _blocks(vec, basis)
    g = _displacements(basis)
    m = basis.spin.m_values
    return float(np.sum(m * (_hop(c) - 2.0 * g * (c * c).sum(axis=1))))


def jz_expectation(vec: np.ndarray, basis: BasisSpec) -> float:
    c = _blocks(vec, basis)
    return float(np.sum(basis.spin.m_values * (c * c).sum(axis=1)))


def spin_casimir(vec: np.ndarray, basis: BasisSpec) -> float:
    """<J^2> from explicit ladder matrices, ``J_z^2 + (J_+ J_- + J_- J_+) / 2``."""
    spin: SpinSector = basis.spin
    j, m = spin.j, spin.m_values
    jp = np.zeros((spin.dim, spin.dim))
    for i in range(spin.dim - 1):
        # J_+ = 2 j_m^+ on the upper off-diagonal
        jp[i + 1, i] = 2.0 * spin_ladder(j, m[i], 1)
    casimir = np.diag(m * m) + 0.5 * (jp @ jp.T + jp.T @ jp)
    c = _blocks(vec, basis)
    # J^2 is diagonal in m, so the displaced field factor overlaps trivially
    return float(np.einsum("in,ik,kn->", c, casimir, c))


def report(params: ModelParams, result: ConvergedResult, vector=None) -> GroundStateReport:
    basis = result.basis
    vec = result.ground_state if vector is None else np.asarray(vector, dtype=float)
    norm = float(vec @ vec)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"eigenvector norm deviates from 1 by {abs(norm - 1.0):.3e}")
    n_atoms = params.n_atoms
    fr = effective_frame(params)
    parity = None
    if basis.kind is BasisKind.PLAIN:
        parity = float(vec @ parity_operator(basis).matvec(vec))
    return GroundStateReport(
        e0_per_atom=result.e0 / n_atoms,
        e0_shifted_per_atom=(result.e0 + fr.energy_shift) / n_atoms,
        photon_density=photon_number(vec, basis) / n_atoms,
        jz_order=jz_expectation(vec, basis) / basis.spin.j,
        gap=result.e1 - result.e0,
        parity=parity,
        n_max_used=result.n_max_used,
    )


def hellmann_feynman_slope(params: ModelParams, result: ConvergedResult) -> float:
    """<dH/dlambda> = 2 <(b^+ + b) J_z> / sqrt(N gamma_k)."""
    fr = effective_frame(params)
    return 2.0 * field_spin_correlator(result.ground_state, result.basis) / math.sqrt(
        params.n_atoms * fr.gamma_k
    )


def default_step(params: ModelParams) -> float:
    return DEFAULT_STEP_FRACTION * critical_coupling(params)


def warm_n_start(params: ModelParams, kind: BasisKind, neighbour: ConvergedResult,
                 back: int = 4) -> int:
    """Cutoff to start from when a nearby coupling converged at ``neighbour``.

    Starting a few steps below the neighbour keeps the two-quiet-steps test
    meaningful while skipping the climb from the default start.
    """
    return max(default_n_start(params, kind), neighbour.n_max_used - back)


def stencil_energies(params: ModelParams, h: float, kind: BasisKind = BasisKind.DISPLACED,
                     e_tol: float = DERIVATIVE_E_TOL, tol: float = DEFAULT_TOL,
                     guess: ConvergedResult | None = None, n_start: int | None = None):
    """Ground energies at ``lam - h, lam, lam + h`` on one shared photon cutoff.

    Each point is converged on its own, then any point whose cutoff is below
    the largest of the three is re-solved there.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if params.lam - h < 0:
        raise ValueError(f"stencil leaves lam >= 0: lam={params.lam}, h={h}")
    points = [params.with_(lam=params.lam + s * h) for s in (-1, 0, 1)]
    results = []
    for p in points:
        r = converge_truncation(p, kind, e_tol=e_tol, tol=tol, count=1, guess=guess, n_start=n_start)
        results.append(r)
        guess = r
        n_start = warm_n_start(p, kind, r)
    n_shared = max(r.n_max_used for r in results)
    for i, (p, r) in enumerate(zip(points, results)):
        if r.n_max_used != n_shared:
            results[i] = solve_fixed(p, n_shared, kind, count=1, tol=tol, guess=r)
    return results


def second_derivative_e0(params: ModelParams, h: float | None = None,
                         kind: BasisKind = BasisKind.DISPLACED,
                         e_tol: float = DERIVATIVE_E_TOL, tol: float = DEFAULT_TOL,
                         guess: ConvergedResult | None = None) -> float:
    """Central difference ``[E0(l+h) - 2 E0(l) + E0(l-h)] / (N h^2)``."""
    if h is None:
        h = default_step(params)
    lo, mid, hi = stencil_energies(params, h, kind, e_tol, tol, guess)
    return (hi.e0 - 2.0 * mid.e0 + lo.e0) / (params.n_atoms * h * h)


def parabola_vertex(x, y) -> float:
    """Abscissa of the vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    curv = (d12 - d01) / (x2 - x0)
    if curv == 0:
        return float(x1)
    return float((x0 + x1) / 2.0 - d01 / (2.0 * curv))


def curvature_curve(params: ModelParams, lambda_grid, h: float | None = None,
                    kind: BasisKind = BasisKind.DISPLACED, e_tol: float = DERIVATIVE_E_TOL,
                    tol: float = DEFAULT_TOL):
    """``[(lam, N^-1 d^2E0/dlam^2), ...]`` over the grid, solved in grid order."""
    grid = [float(x) for x in lambda_grid]
    if h is None:
        h = default_step(params)
    curve = []
    guess = None
    n_start = None
    for lam in grid:
        p = params.with_(lam=lam)
        lo, mid, hi = stencil_energies(p, h, kind, e_tol, tol, guess, n_start)
        guess = mid
        n_start = warm_n_start(p, kind, mid)
        curve.append((lam, (hi.e0 - 2.0 * mid.e0 + lo.e0) / (p.n_atoms * h * h)))
    return curve


def finite_size_critical(params: ModelParams, lambda_grid, h: float | None = None,
                         kind: BasisKind = BasisKind.DISPLACED,
                         e_tol: float = DERIVATIVE_E_TOL, tol: float = DEFAULT_TOL):
    """Coupling where the scaled curvature of E0 is most negative.

    Returns ``(lambda_c_N, curve)``. The grid minimum is refined by the vertex
    of the parabola through it and its two neighbours.
    """
    grid = [float(x) for x in lambda_grid]
    if len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda_grid must be ascending with at least three points")
    curve = curvature_curve(params, grid, h, kind, e_tol, tol)
    return locate_dip(curve), curve


def locate_dip(curve) -> float:
    """Parabolic refinement of the interior minimum of ``[(x, y), ...]``."""
    xs = [c[0] for c in curve]
    ys = [c[1] for c in curve]
    i = int(np.argmin(ys))
    if i == 0 or i == len(ys) - 1:
        raise BracketError(f"curvature minimum at grid edge (lam={xs[i]})", curve)
    return parabola_vertex(xs[i - 1:i + 2], ys[i - 1:i + 2])


def refine_critical(params: ModelParams, lo: float, hi: float, points: int = 9, rounds: int = 3,
                    shrink: float = 0.25, h: float | None = None,
                    kind: BasisKind = BasisKind.DISPLACED, e_tol: float = DERIVATIVE_E_TOL,
                    tol: float = DEFAULT_TOL):
    """Zoom ``finite_size_critical`` onto the dip over successive grids.

    Each round re-centres a grid of width ``shrink`` times the previous one on
    the refined estimate. Returns ``(lambda_c_N, curve)`` with the union of all
    evaluated points, sorted by coupling.
    """
    seen = {}
    est = None
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        lc, curve = finite_size_critical(params, grid, h, kind, e_tol, tol)
        seen.update(dict(curve))
        est = lc
        half = 0.5 * (hi - lo) * shrink
        lo, hi = max(est - half, (h or default_step(params)) * 1.01), est + half
    return est, sorted(seen.items())
