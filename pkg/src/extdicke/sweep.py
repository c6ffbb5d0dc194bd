"""Batch parameter scans and their tabular output.

Phase-diagram axes are the sum-rule scale ``sqrt(delta * kappa)``; with
``delta`` held fixed each axis value ``s`` is realised as ``kappa = s**2 / delta``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .eigensolve import DEFAULT_TOL, solve_fixed
from .hamiltonian import BasisKind
from .meanfield import critical_coupling, transition_window
from .model import ModelParams, effective_frame
from .observables import (
    DEFAULT_STEP_FRACTION,
    DERIVATIVE_E_TOL,
    BracketError,
    refine_critical,
    report,
    stencil_energies,
)

COLUMN_TYPES = {
    "axis": float, "omega": float, "delta": float, "Omega": float, "kappa": float,
    "lambda": float, "lambda_ratio": float, "atoms": int, "basis": str,
    "gamma_k": float, "lambda_c": float, "lambda_star": float, "kappa_c": float,
    "window_nonempty": bool, "lambda_c_N": float, "below_star": bool,
    "dip_depth": float, "e0_per_atom": float, "e0_shifted_per_atom": float,
    "d2e0": float, "photon_density": float, "jz_order": float, "gap": float,
    "n_max_used": int, "status": str, "wall_time": float,
}

MEANFIELD_COLUMNS = ("axis", "omega", "delta", "Omega", "kappa", "gamma_k",
                     "lambda_c", "lambda_star", "kappa_c", "window_nonempty")
FINITE_COLUMNS = ("axis", "omega", "delta", "Omega", "kappa", "atoms", "basis", "gamma_k",
                  "lambda_c", "lambda_star", "kappa_c", "window_nonempty", "lambda_c_N",
                  "below_star", "dip_depth", "status")
ENERGY_COLUMNS = ("atoms", "lambda_ratio", "lambda", "omega", "delta", "Omega", "kappa",
                  "basis", "gamma_k", "lambda_c", "lambda_star", "kappa_c", "window_nonempty",
                  "e0_per_atom", "e0_shifted_per_atom", "d2e0", "photon_density", "jz_order",
                  "gap", "n_max_used", "status")


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"{self.name}: count must be >= 2, got {self.count}")
        if not self.start < self.stop:
            raise ValueError(f"{self.name}: start must be < stop ({self.start} >= {self.stop})")
        if self.spacing not in ("linear", "log"):
            raise ValueError(f"{self.name}: spacing must be 'linear' or 'log'")
        if self.spacing == "log" and self.start <= 0:
            raise ValueError(f"{self.name}: log spacing needs start > 0")

    def values(self) -> list[float]:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count).tolist()
        return np.linspace(self.start, self.stop, self.count).tolist()


@dataclass(frozen=True)
class SweepSpec:
    axis: Axis
    omega: float = 1.0
    delta: float = 1.0
    omega_aa: float = -0.2
    kappa: float = 0.5
    atoms: tuple = (16, 32, 64, 128)
    basis: BasisKind = BasisKind.DISPLACED
    e_tol: float = DERIVATIVE_E_TOL
    tol: float = DEFAULT_TOL
    h_fraction: float = DEFAULT_STEP_FRACTION
    bracket: tuple = (0.95, 1.6)
    points: int = 9
    rounds: int = 3
    workers: int = 1
    timing: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for n in self.atoms:
            if int(n) != n or n < 2 or n % 2:
                raise ValueError(f"atoms must be positive even integers, got {n}")
        if self.e_tol <= 0 or self.tol <= 0 or self.h_fraction <= 0:
            raise ValueError("e_tol, tol and h_fraction must be positive")
        lo, hi = self.bracket
        if not 0 < lo < hi:
            raise ValueError(f"bracket must satisfy 0 < lo < hi, got {self.bracket}")
        if self.points < 3 or self.rounds < 1:
            raise ValueError("points must be >= 3 and rounds >= 1")
        object.__setattr__(self, "basis", BasisKind(self.basis))

    def params(self, lam=0.0, kappa=None, atoms=1) -> ModelParams:
        return ModelParams(self.omega, self.delta, lam, self.omega_aa,
                           self.kappa if kappa is None else kappa, atoms)

    def kappa_for(self, axis_value: float) -> float:
        if axis_value < 0:
            raise ValueError(f"axis value {axis_value} < 0 implies kappa < 0")
        return axis_value * axis_value / self.delta

    def describe(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["basis"] = self.basis.value
        return d


def worker_count(spec: SweepSpec) -> int:
    env = os.environ.get("DICKE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"DICKE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("DICKE_THREADS must be >= 1")
        return n
    return max(1, int(spec.workers))


def _run(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _derived(p: ModelParams) -> dict:
    win = transition_window(p)
    return {
        "gamma_k": effective_frame(p).gamma_k,
        "lambda_c": win.lambda_c,
        "lambda_star": win.lambda_star,
        "kappa_c": win.kappa_c,
        "window_nonempty": win.nonempty,
    }


def _inputs(p: ModelParams) -> dict:
    return {"omega": p.omega, "delta": p.delta, "Omega": p.omega_aa, "kappa": p.kappa}


def phase_diagram_meanfield(spec: SweepSpec) -> list[dict]:
    rows = []
    for s in spec.axis.values():
        p = spec.params(kappa=spec.kappa_for(s))
        rows.append({"axis": s, **_inputs(p), **_derived(p)})
    return rows


def _finite_task(task):
    spec, s, n_atoms = task
    t0 = time.perf_counter()
    p = spec.params(kappa=spec.kappa_for(s), atoms=n_atoms)
    row = {"axis": s, **_inputs(p), "atoms": n_atoms, "basis": spec.basis.value, **_derived(p)}
    row.update(lambda_c_N=None, below_star=None, dip_depth=None, status="ok")
    try:
        lam_c = critical_coupling(p)
        lo, hi = spec.bracket
        h = spec.h_fraction * lam_c
        est, curve = refine_critical(p.with_(lam=lam_c), lo * lam_c, hi * lam_c, spec.points,
                                     spec.rounds, h=h, kind=spec.basis, e_tol=spec.e_tol,
                                     tol=spec.tol)
        row["lambda_c_N"] = est
        row["below_star"] = est < row["lambda_star"]
        row["dip_depth"] = min(v for _, v in curve)
    except BracketError as exc:
        row["status"] = f"bracket-failure: {exc}"
    except Exception as exc:  # recorded per row, the sweep carries on
        row["status"] = f"solver-failure: {type(exc).__name__}: {exc}"
    if spec.timing:
        row["wall_time"] = time.perf_counter() - t0
    return row


def phase_diagram_finite(spec: SweepSpec) -> list[dict]:
    tasks = [(spec, s, n) for s in spec.axis.values() for n in spec.atoms]
    for s in spec.axis.values():
        spec.kappa_for(s)
    return _run(_finite_task, tasks, worker_count(spec))


def _energy_chain(task):
    """All couplings for one atom count, solved in order so each seeds the next."""
    spec, n_atoms = task
    base = spec.params(atoms=n_atoms)
    lam_c = critical_coupling(base)
    h = spec.h_fraction * lam_c
    rows = []
    guess = None
    for ratio in spec.axis.values():
        t0 = time.perf_counter()
        p = base.with_(lam=ratio * lam_c)
        row = {"atoms": n_atoms, "lambda_ratio": ratio, "lambda": p.lam, **_inputs(p),
               "basis": spec.basis.value, **_derived(p)}
        row.update(e0_per_atom=None, e0_shifted_per_atom=None, d2e0=None, photon_density=None,
                   jz_order=None, gap=None, n_max_used=None, status="ok")
        try:
            lo, mid, hi = stencil_energies(p, h, spec.basis, spec.e_tol, spec.tol, guess)
            guess = mid
            full = solve_fixed(p, mid.n_max_used, spec.basis, count=2, tol=spec.tol, guess=mid)
            rep = report(p, full)
            row.update(
                e0_per_atom=rep.e0_per_atom,
                e0_shifted_per_atom=rep.e0_shifted_per_atom,
                d2e0=(hi.e0 - 2.0 * mid.e0 + lo.e0) / (n_atoms * h * h),
                photon_density=rep.photon_density,
                jz_order=rep.jz_order,
                gap=rep.gap,
                n_max_used=mid.n_max_used,
            )
        except Exception as exc:  # recorded per row, the sweep carries on
            row["status"] = f"solver-failure: {type(exc).__name__}: {exc}"
        if spec.timing:
            row["wall_time"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def energy_sweep(spec: SweepSpec) -> list[dict]:
    """Rows ordered by atom count, then by ``lambda / lambda_c``."""
    if spec.axis.start - spec.h_fraction < 0:
        raise ValueError("lambda/lambda_c axis must leave room for the derivative stencil")
    chains = _run(_energy_chain, [(spec, n) for n in spec.atoms], worker_count(spec))
    return [row for chain in chains for row in chain]


# -- output ---------------------------------------------------------------------------------

def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _parse(text: str, kind):
    if text == "":
        return None
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    return kind(text)


def render_csv(rows, columns, meta: dict | None = None, timestamp: str | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# extdicke {__version__}\n")
    if meta:
        echo = "; ".join(f"{k}={meta[k]}" for k in sorted(meta))
        buf.write(f"# config: {echo}\n")
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    buf.write(f"# generated: {timestamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(rows, columns) -> str:
    out = []
    for row in rows:
        obj = {}
        for c in columns:
            v = row.get(c)
            if isinstance(v, (float, np.floating)):
                v = float(v) if math.isfinite(v) else None
            obj[c] = v
        out.append(json.dumps(obj))
    return "".join(line + "\n" for line in out)


def columns_for(rows, base) -> tuple:
    if any("wall_time" in r for r in rows):
        return tuple(base) + ("wall_time",)
    return tuple(base)


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".extdicke-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(source) -> tuple[list[str], list[str], list[dict]]:
    """Parse a table written by ``render_csv``: ``(comment lines, columns, rows)``."""
    text = source.read() if hasattr(source, "read") else open(source).read()
    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(body)
    columns = next(reader)
    rows = []
    for rec in reader:
        if len(rec) != len(columns):
            raise ValueError(f"row has {len(rec)} fields, header has {len(columns)}")
        rows.append({c: _parse(v, COLUMN_TYPES.get(c, str)) for c, v in zip(columns, rec)})
    return comments, columns, rows
