"""Lowest eigenpairs and photon-truncation convergence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .hamiltonian import BasisKind, BasisSpec, SparseSymOperator, build, displacement
from .model import ModelParams

DENSE_THRESHOLD = 2000
DEFAULT_TOL = 1e-10
DEFAULT_E_TOL = 1e-8
DEFAULT_N_CAP = 400
_SEED = 20120731


class ConvergenceError(RuntimeError):
    """The Krylov iteration hit its cap; ``residual`` is the best reached."""

    def __init__(self, message, residual=math.inf):
        super().__init__(message)
        self.residual = residual


class TruncationError(RuntimeError):
    """The photon cutoff exceeded its cap before the energy settled."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class ConvergedResult:
    e0: float
    e1: float
    n_max_used: int
    residual: float
    history: list
    kind: BasisKind
    vectors: np.ndarray = field(repr=False)
    operator: SparseSymOperator = field(repr=False)

    @property
    def ground_state(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def basis(self) -> BasisSpec:
        return self.operator.basis


def _fix_signs(vecs):
    for i in range(vecs.shape[1]):
        k = np.argmax(np.abs(vecs[:, i]))
        if vecs[k, i] < 0:
            vecs[:, i] *= -1.0
    return vecs


def _residuals(op, vals, vecs):
    r = op.matvec(vecs) - vecs * vals
    return np.linalg.norm(r, axis=0)


def lowest_eigenpairs(op: SparseSymOperator, count: int = 1, tol: float = DEFAULT_TOL,
                      v0=None, method: str = "auto", max_basis: int = 96,
                      max_matvecs: int = 60000):
    """The ``count`` smallest eigenpairs of ``op`` in ascending order.

    Small problems (``dim <= DENSE_THRESHOLD``) go to LAPACK. Larger ones use a
    thick-restart block Krylov iteration with full reorthogonalization; each
    returned pair satisfies ``|Hv - ev| <= tol * max(1, |e|)``. ``v0`` (one or
    more columns) seeds the Krylov space, e.g. a neighbouring solution.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    count = min(count, op.dim)
    if method == "auto":
        method = "dense" if op.dim <= DENSE_THRESHOLD else "krylov"
    if method == "dense":
        vals, vecs = sla.eigh(op.to_dense(), subset_by_index=[0, count - 1])
    elif method == "krylov":
        vals, vecs = _block_krylov(op, count, tol, v0, max_basis, max_matvecs)
    else:
        raise ValueError(f"unknown method {method!r}")
    vecs = _fix_signs(np.ascontiguousarray(vecs))
    return [(float(vals[i]), vecs[:, i]) for i in range(count)]


def _orthonormalize(w, v, drop=1e-10):
    """Columns of ``w`` made orthonormal to ``v`` and each other; weak ones dropped."""
    norms = np.linalg.norm(w, axis=0)
    for _ in range(2):
        if v is not None and v.shape[1]:
            w = w - v @ (v.T @ w)
    out = []
    for i in range(w.shape[1]):
        c = w[:, i]
        for q in out:
            c = c - q * (q @ c)
        for q in out:
            c = c - q * (q @ c)
        nrm = np.linalg.norm(c)
        if nrm > drop * max(norms[i], 1e-300):
            out.append(c / nrm)
    if not out:
        return np.zeros((w.shape[0], 0))
    return np.column_stack(out)


def _block_krylov(op, count, tol, v0, max_basis, max_matvecs):
    dim = op.dim
    rng = np.random.default_rng(_SEED)
    block = count
    keep = min(max(count + 8, 2 * count), dim)
    max_basis = min(max(max_basis, keep + 2 * block), dim)

    start = rng.standard_normal((dim, block))
    if v0 is not None:
        v0 = np.asarray(v0, dtype=float).reshape(dim, -1)[:, :block]
        start[:, : v0.shape[1]] = v0
    V = _orthonormalize(start, None)
    AV = op.matvec(V)
    T = V.T @ AV
    matvecs = V.shape[1]
    best = math.inf
    while True:
        T = 0.5 * (T + T.T)
        theta, Y = np.linalg.eigh(T)
        k = min(count, theta.size)
        X = V @ Y[:, :k]
        R = AV @ Y[:, :k] - X * theta[:k]
        res = np.linalg.norm(R, axis=0)
        limits = tol * np.maximum(1.0, np.abs(theta[:k]))
        best = min(best, float(np.max(res / limits) * tol)) if k else best
        if k == count and np.all(res <= limits):
            return theta[:count], X
        if V.shape[1] >= dim:
            # whole space spanned: Ritz pairs are exact up to roundoff
            return theta[:count], X
        if matvecs >= max_matvecs:
            raise ConvergenceError(
                f"Krylov iteration did not converge after {matvecs} products "
                f"(best scaled residual {best:.3e})",
                residual=best,
            )
        if V.shape[1] >= max_basis:
            nk = min(keep, theta.size)
            V = V @ Y[:, :nk]
            AV = AV @ Y[:, :nk]
            # re-orthonormalise to keep the thick-restart basis clean
            q, r = np.linalg.qr(V)
            V, AV = q, np.linalg.solve(r.T, AV.T).T
            T = V.T @ AV
            continue
        todo = res > limits
        W = R[:, todo] if np.any(todo) else R
        W = _orthonormalize(W, V)[:, : max_basis - V.shape[1]]
        if W.shape[1] == 0:
            W = _orthonormalize(rng.standard_normal((dim, 1)), V)
            if W.shape[1] == 0:
                return theta[:count], X
        AW = op.matvec(W)
        matvecs += W.shape[1]
        C = V.T @ AW
        D = W.T @ AW
        T = np.block([[T, C], [C.T, D]])
        V = np.hstack([V, W])
        AV = np.hstack([AV, AW])


def pad_vectors(vecs: np.ndarray, source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """Zero-pad (or cut) the photon index of spin-major vectors to a new cutoff."""
    if source.spin.dim != target.spin.dim:
        raise ValueError("spin sectors differ")
    vecs = np.asarray(vecs).reshape(source.dim, -1)
    k = vecs.shape[1]
    a = vecs.T.reshape(k, source.spin.dim, source.n_boson)
    out = np.zeros((k, target.spin.dim, target.n_boson))
    n = min(source.n_boson, target.n_boson)
    out[:, :, :n] = a[:, :, :n]
    return out.reshape(k, target.dim).T


def default_n_start(params: ModelParams, kind: BasisKind) -> int:
    if BasisKind(kind) is BasisKind.DISPLACED:
        return 8
    g = displacement(params, params.j)
    return 8 + math.ceil(4.0 * g * g)


def solve_fixed(params: ModelParams, n_max: int, kind: BasisKind = BasisKind.DISPLACED,
                count: int = 2, tol: float = DEFAULT_TOL, guess=None,
                method: str = "auto") -> ConvergedResult:
    """Single solve at a fixed cutoff. ``guess`` is an earlier ConvergedResult."""
    op = build(params, n_max, kind)
    v0 = None
    if guess is not None and guess.kind is BasisKind(kind):
        v0 = pad_vectors(guess.vectors, guess.basis, op.basis)
    pairs = lowest_eigenpairs(op, count, tol, v0=v0, method=method)
    vecs = np.column_stack([v for _, v in pairs])
    vals = np.array([e for e, _ in pairs])
    res = float(np.max(_residuals(op, vals, vecs)))
    e0 = vals[0]
    e1 = vals[1] if vals.size > 1 else math.nan
    return ConvergedResult(float(e0), float(e1), int(n_max), res, [(int(n_max), float(e0))],
                           BasisKind(kind), vecs, op)


def converge_truncation(params: ModelParams, kind: BasisKind = BasisKind.DISPLACED,
                        e_tol: float = DEFAULT_E_TOL, n_start: int | None = None,
                        n_step: int = 2, n_cap: int = DEFAULT_N_CAP, tol: float = DEFAULT_TOL,
                        count: int = 2, guess: ConvergedResult | None = None,
                        method: str = "auto") -> ConvergedResult:
    """Raise the photon cutoff until the ground energy moves by less than
    ``e_tol`` on two consecutive steps."""
    if e_tol <= 0:
        raise ValueError("e_tol must be positive")
    if n_step < 1:
        raise ValueError("n_step must be >= 1")
    kind = BasisKind(kind)
    n = default_n_start(params, kind) if n_start is None else int(n_start)
    history = []
    streak = 0
    prev = None
    while True:
        if n > n_cap:
            raise TruncationError(
                f"photon cutoff exceeded cap {n_cap} before converging to {e_tol}", history
            )
        res = solve_fixed(params, n, kind, count, tol, guess=guess, method=method)
        history.append((n, res.e0))
        if prev is not None and abs(res.e0 - prev) < e_tol:
            streak += 1
        else:
            streak = 0
        if streak >= 2:
            res.history = history
            return res
        prev = res.e0
        guess = res
        n += n_step
