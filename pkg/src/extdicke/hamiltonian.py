"""Finite-N Hamiltonian in the Bogoliubov-rotated frame.

    H = w b^+ b - D J_x + (2 l / sqrt(N)) (b^+ + b) J_z + (2 W / N) (J^2 - J_x^2)

is assembled as a real symmetric sparse matrix in one of two product bases,
both ordered spin-major (index ``i * (n_max + 1) + n`` with ``m = -j + i``):

* plain Fock ``|n> (x) |j, m>``, used as the oracle;
* displaced Fock ``|n>_{A_m} (x) |j, m>`` where ``A_m = b + g_m`` removes the
  field shift conditioned on ``m``. The diagonal blocks become diagonal and
  neighbouring ``m`` blocks couple through Fock-state displacement overlaps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from . import kernels
from .model import ModelParams, effective_frame

DEFAULT_MAX_DIM = 4_000_000


class DimensionError(ValueError):
    pass


class BasisKind(str, enum.Enum):
    PLAIN = "plain"
    DISPLACED = "displaced"


@dataclass(frozen=True)
class SpinSector:
    j: float

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1

    @property
    def m_values(self) -> np.ndarray:
        return -self.j + np.arange(self.dim, dtype=float)


@dataclass(frozen=True)
class BasisSpec:
    kind: BasisKind
    n_max: int
    spin: SpinSector
    displacements: tuple = ()

    @property
    def n_boson(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.n_boson * self.spin.dim


@dataclass(frozen=True, eq=False)
class SparseSymOperator:
    """Real symmetric matrix stored as its lower triangle in coordinate form."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    basis: BasisSpec | None = None
    _dense: list = field(default_factory=list, repr=False)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vec = x.ndim == 1
        xb = np.ascontiguousarray(x.reshape(self.dim, -1))
        out = np.empty_like(xb)
        kernels.symv_lower(self.rows, self.cols, self.vals, xb, out)
        return out[:, 0] if vec else out

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        if not self._dense:
            a = np.zeros((self.dim, self.dim))
            a[self.rows, self.cols] = self.vals
            a[self.cols, self.rows] = self.vals
            self._dense.append(a)
        return self._dense[0].copy()

    def dump(self, stream: TextIO) -> None:
        """Write ``dim nnz`` then one ``row col value`` line per stored entry."""
        stream.write(f"{self.dim} {self.nnz}\n")
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()):
            stream.write(f"{r} {c} {v:.17g}\n")


def load_matrix(stream: TextIO) -> SparseSymOperator:
    dim, nnz = (int(t) for t in stream.readline().split())
    data = np.loadtxt(stream, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"header announces {nnz} entries, found {data.shape[0]}")
    return _from_triplets(dim, data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2])


def _from_triplets(dim, rows, cols, vals, basis=None) -> SparseSymOperator:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if np.any(rows < cols):
        raise ValueError("entries must lie in the lower triangle")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite matrix entry")
    keep = vals != 0.0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((cols, rows))
    return SparseSymOperator(
        dim,
        np.ascontiguousarray(rows[order]),
        np.ascontiguousarray(cols[order]),
        np.ascontiguousarray(vals[order]),
        basis,
    )


def spin_ladder(j: float, m: float, direction: int) -> float:
    """``j_m^(+/-) = 1/2 sqrt(j(j+1) - m(m +/- 1))`` so that
    ``J_x |j,m> = j_m^+ |j,m+1> + j_m^- |j,m-1>``."""
    if abs(m) > j + 1e-12:
        raise ValueError(f"|m| = {abs(m)} exceeds j = {j}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if abs(m + direction) > j + 1e-12:
        return 0.0
    return 0.5 * math.sqrt(j * (j + 1) - m * (m + direction))


def _spin_terms(params: ModelParams):
    """Matrix elements of ``-D J_x + (2W/N)(J^2 - J_x^2)`` in the J_z basis.

    Returns ``(m, diag, off1, off2)`` with ``off1[i] = <m_i+1|.|m_i>`` and
    ``off2[i] = <m_i+2|.|m_i>``.
    """
    j = params.j
    m = SpinSector(j).m_values
    up = np.array([spin_ladder(j, mi, 1) for mi in m])
    dn = np.array([spin_ladder(j, mi, -1) for mi in m])
    s = 2.0 * params.omega_aa / params.n_atoms
    # j_{m-1}^+ j_m^- and j_{m+1}^- j_m^+ as they appear in the diagonal
    up_below = np.concatenate(([0.0], up[:-1]))
    dn_above = np.concatenate((dn[1:], [0.0]))
    diag = s * (j * (j + 1) - up_below * dn - dn_above * up)
    off1 = -params.delta * up[:-1]
    off2 = -s * up[:-2] * up[1:-1]
    return m, diag, off1, off2


def displacement(params: ModelParams, m: float) -> float:
    if abs(m) > params.j + 1e-12:
        raise ValueError(f"|m| = {abs(m)} exceeds j = {params.j}")
    fr = effective_frame(params)
    return 2.0 * fr.lambda_k * m / (fr.omega_k * math.sqrt(params.n_atoms))


def overlap_matrix(g: float, n_max: int) -> np.ndarray:
    """``O[l, k] = <l| exp(g (b^+ - b)) |k>`` for ``l, k <= n_max``."""
    if not math.isfinite(g):
        raise ValueError("displacement must be finite")
    return kernels.displacement_overlaps(float(g), int(n_max))


def displaced_overlap(g: float, l: int, k: int) -> float:
    if l < 0 or k < 0:
        raise ValueError("Fock indices must be non-negative")
    return float(overlap_matrix(g, max(l, k))[l, k])


def _check_dim(n_max, params, max_dim):
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    dim = (n_max + 1) * (params.n_atoms + 1)
    if dim > max_dim:
        raise DimensionError(f"dimension {dim} exceeds cap {max_dim}")
    return dim


def make_basis(params: ModelParams, n_max: int, kind: BasisKind) -> BasisSpec:
    spin = SpinSector(params.j)
    disp = ()
    if BasisKind(kind) is BasisKind.DISPLACED:
        disp = tuple(displacement(params, m) for m in spin.m_values)
    return BasisSpec(BasisKind(kind), int(n_max), spin, disp)


def build_plain_fock(params: ModelParams, n_max: int, max_dim: int = DEFAULT_MAX_DIM) -> SparseSymOperator:
    dim = _check_dim(n_max, params, max_dim)
    fr = effective_frame(params)
    nb = n_max + 1
    m, diag, off1, off2 = _spin_terms(params)
    ns = m.size
    n = np.arange(nb, dtype=float)
    blk = np.arange(ns)[:, None] * nb

    parts = []
    # diagonal
    idx = (blk + np.arange(nb)).ravel()
    parts.append((idx, idx, (fr.omega_k * n[None, :] + diag[:, None]).ravel()))
    # (b^+ + b) J_z inside each spin block
    if nb > 1:
        c = 2.0 * fr.lambda_k / math.sqrt(params.n_atoms)
        lo = (blk + np.arange(nb - 1)).ravel()
        parts.append((lo + 1, lo, (c * m[:, None] * np.sqrt(n[1:])[None, :]).ravel()))
    # spin hopping, identity on the field
    for shift, coef in ((1, off1), (2, off2)):
        if coef.size:
            col = (blk[:-shift] + np.arange(nb)).ravel()
            parts.append((col + shift * nb, col, np.repeat(coef, nb)))
    rows, cols, vals = (np.concatenate(p) for p in zip(*parts))
    return _from_triplets(dim, rows, cols, vals, make_basis(params, n_max, BasisKind.PLAIN))


def build_displaced(params: ModelParams, n_max: int, max_dim: int = DEFAULT_MAX_DIM) -> SparseSymOperator:
    dim = _check_dim(n_max, params, max_dim)
    fr = effective_frame(params)
    nb = n_max + 1
    basis = make_basis(params, n_max, BasisKind.DISPLACED)
    g = np.array(basis.displacements)
    m, diag, off1, off2 = _spin_terms(params)
    ns = m.size
    n = np.arange(nb, dtype=float)
    blk = np.arange(ns)[:, None] * nb

    parts = []
    idx = (blk + np.arange(nb)).ravel()
    parts.append((idx, idx, (fr.omega_k * (n[None, :] - (g * g)[:, None]) + diag[:, None]).ravel()))
    ll, kk = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    ll, kk = ll.ravel(), kk.ravel()
    for shift, coef in ((1, off1), (2, off2)):
        if not coef.size:
            continue
        # g is linear in m, so one overlap matrix serves every block pair at this distance
        ov = overlap_matrix(g[shift] - g[0], n_max).ravel()
        base = np.arange(ns - shift) * nb
        rows = (base[:, None] + shift * nb + ll[None, :]).ravel()
        cols = (base[:, None] + kk[None, :]).ravel()
        parts.append((rows, cols, (coef[:, None] * ov[None, :]).ravel()))
    rows, cols, vals = (np.concatenate(p) for p in zip(*parts))
    return _from_triplets(dim, rows, cols, vals, basis)


def build(params: ModelParams, n_max: int, kind: BasisKind = BasisKind.DISPLACED,
          max_dim: int = DEFAULT_MAX_DIM) -> SparseSymOperator:
    if BasisKind(kind) is BasisKind.PLAIN:
        return build_plain_fock(params, n_max, max_dim)
    return build_displaced(params, n_max, max_dim)


def overlap_asymmetry(params: ModelParams, n_max: int) -> float:
    """Largest mismatch between the m -> m' and m' -> m overlap blocks.

    Truncated displaced blocks are assembled from one direction and mirrored;
    this reports what the other direction would have given.
    """
    basis = make_basis(params, n_max, BasisKind.DISPLACED)
    g = basis.displacements
    worst = 0.0
    for shift in (1, 2):
        if len(g) > shift:
            d = g[shift] - g[0]
            worst = max(worst, float(np.max(np.abs(overlap_matrix(d, n_max) - overlap_matrix(-d, n_max).T))))
    return worst


def parity_operator(basis: BasisSpec) -> SparseSymOperator:
    """``exp(i pi b^+b) exp(i pi (J_x - j))``: maps ``|n, m>`` to ``(-1)^n |n, -m>``."""
    if basis.kind is not BasisKind.PLAIN:
        raise NotImplementedError("parity operator is only provided in the plain Fock basis")
    nb, ns = basis.n_boson, basis.spin.dim
    i = np.arange(ns)
    i = i[ns - 1 - i >= i]
    n = np.arange(nb)
    cols = (i[:, None] * nb + n).ravel()
    rows = ((ns - 1 - i)[:, None] * nb + n).ravel()
    vals = np.tile(np.where(n % 2 == 0, 1.0, -1.0), i.size)
    return _from_triplets(basis.dim, rows, cols, vals, basis)
