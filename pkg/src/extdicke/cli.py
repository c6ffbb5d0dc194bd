"""Command line front end.

Every flag can also come from a ``--config`` file of ``key=value`` lines, the
key being the flag name without leading dashes. Flags given on the command
line win over the file. Exit status: 0 success, 1 invalid input, 2 solver
failure.
"""

from __future__ import annotations

import argparse
import io
import math
import sys

from .eigensolve import ConvergenceError, TruncationError, converge_truncation, solve_fixed
from .hamiltonian import BasisKind, DimensionError, build
from .meanfield import WindowCollapsed, minimize, transition_window
from .model import ModelParams, ParameterError
from .observables import BracketError, report
from . import sweep

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atoms_list(text):
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _physics(p, atoms_default=None):
    p.add_argument("--omega", type=float, default=1.0, help="cavity frequency")
    p.add_argument("--delta", type=float, default=1.0, help="atomic splitting")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="atom-cavity coupling")
    p.add_argument("--Omega", dest="omega_aa", type=float, default=0.0, help="interatomic coupling")
    p.add_argument("--kappa", type=float, default=0.0, help="A^2 strength")
    if atoms_default is not None:
        p.add_argument("--atoms", type=int, default=atoms_default, help="number of atoms N")


def _solver(p):
    p.add_argument("--basis", choices=[k.value for k in BasisKind], default="displaced")
    p.add_argument("--etol", type=float, default=1e-8, help="truncation convergence threshold")
    p.add_argument("--tol", type=float, default=1e-10, help="eigen-residual tolerance")


def _sweep_flags(p, axis_defaults, atoms_default):
    start, stop, count = axis_defaults
    p.add_argument("--start", type=float, default=start)
    p.add_argument("--stop", type=float, default=stop)
    p.add_argument("--count", type=int, default=count)
    p.add_argument("--spacing", choices=["linear", "log"], default="linear")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--Omega", dest="omega_aa", type=float, default=-0.2)
    p.add_argument("--output", default=None, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    if atoms_default is not None:
        p.add_argument("--atoms", type=_atoms_list, default=atoms_default,
                       help="comma-separated even atom counts")
        p.add_argument("--basis", choices=[k.value for k in BasisKind], default="displaced")
        p.add_argument("--etol", type=float, default=1e-10)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--step", type=float, default=1e-3, help="derivative step as a fraction of lambda_c")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--timing", type=_bool, nargs="?", const=True, default=False,
                       help="add a per-row wall_time column")


def _command(sub, name, help):
    p = sub.add_parser(name, help=help, allow_abbrev=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="key=value configuration file")
    return p


def build_parser() -> _Parser:
    parser = _Parser(prog="extdicke", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--config", default=None, help="key=value configuration file")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = _command(sub, "meanfield", "mean-field ground state and critical point")
    _physics(p)

    p = _command(sub, "window", "sum-rule transition window")
    _physics(p)

    p = _command(sub, "ed", "exact diagonalization at one parameter point")
    _physics(p, atoms_default=16)
    _solver(p)
    p.add_argument("--nmax", type=int, default=None, help="fixed photon cutoff (skip convergence)")
    p.add_argument("--nstart", type=int, default=None)
    p.add_argument("--nstep", type=int, default=2)
    p.add_argument("--ncap", type=int, default=400)

    p = _command(sub, "sweep-energy", "E0/N and its curvature against lambda/lambda_c")
    _sweep_flags(p, (0.5, 1.5, 21), (16, 32, 64, 128))
    p.add_argument("--kappa", type=float, default=0.5)

    p = _command(sub, "sweep-phase", "mean-field phase diagram against sqrt(delta*kappa)")
    _sweep_flags(p, (0.0, 1.0, 51), None)

    p = _command(sub, "sweep-phase-finite", "finite-N critical couplings against sqrt(delta*kappa)")
    _sweep_flags(p, (0.65, 0.85, 5), (16, 32, 64, 128))
    p.add_argument("--lo", type=float, default=0.95, help="bracket start as a fraction of lambda_c")
    p.add_argument("--hi", type=float, default=1.6, help="bracket end as a fraction of lambda_c")
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--rounds", type=int, default=3)

    p = _command(sub, "dump-matrix", "write the Hamiltonian in coordinate text form")
    _physics(p, atoms_default=2)
    p.add_argument("--basis", choices=[k.value for k in BasisKind], default="displaced")
    p.add_argument("--nmax", type=int, default=10)
    p.add_argument("--output", default=None)
    return parser


def read_config(path) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: malformed line, expected key=value")
            key, value = (t.strip() for t in line.split("=", 1))
            if not key:
                raise UsageError(f"{path}:{lineno}: empty key")
            out[key] = value
    return out


def _apply_config(subparser, values: dict, source: str):
    by_key = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            by_key[opt.lstrip("-")] = action
    defaults = {}
    for key, text in values.items():
        action = by_key.get(key)
        if action is None or action.dest == "help":
            raise UsageError(f"{source}: unknown key '{key}'")
        conv = action.type or str
        try:
            value = conv(text)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{source}: bad value for '{key}': {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{source}: '{key}' must be one of {sorted(action.choices)}")
        defaults[action.dest] = value
    subparser.set_defaults(**defaults)


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def parse(argv):
    parser = build_parser()
    path = _config_path(argv)
    if path is not None:
        values = read_config(path)
        command = next((a for a in argv if a in _subparsers(parser)), None)
        if command is None:
            raise UsageError("a subcommand is required")
        _apply_config(_subparsers(parser)[command], values, path)
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    return args


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _params(args, atoms=1) -> ModelParams:
    try:
        return ModelParams(args.omega, args.delta, args.lam, args.omega_aa, args.kappa,
                           getattr(args, "atoms", atoms))
    except ParameterError as exc:
        flag = _FLAG_NAMES.get(exc.name, exc.name)
        raise UsageError(f"--{flag}: {exc}") from None


def _emit(args, text, out):
    path = getattr(args, "output", None)
    if path:
        sweep.write_atomic(path, text)
    else:
        out.write(text)


def _fmt(x):
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.10g}"
    return str(x)


def cmd_meanfield(args, out):
    p = _params(args)
    sol = minimize(p)
    win = transition_window(p)
    for key, val in (("phase", sol.phase.value), ("e0_per_atom", sol.energy_per_atom),
                     ("alpha", sol.alpha), ("beta", sol.beta), ("x", sol.x),
                     ("lambda_c", win.lambda_c), ("lambda_star", win.lambda_star),
                     ("kappa_c", win.kappa_c), ("window_nonempty", win.nonempty)):
        out.write(f"{key}: {_fmt(val)}\n")
    out.write(_window_line(p, win))


def _window_line(p, win):
    if win.nonempty:
        return f"window: ({_fmt(win.lambda_c)}, {_fmt(win.lambda_star)})\n"
    if p.omega_aa == 0:
        why = "no-go"
    elif p.omega_aa > 0:
        why = "repulsive interaction"
    elif math.isnan(win.lambda_c):
        why = "collapsed"
    else:
        why = "kappa <= kappa_c"
    return f"window: empty ({why})\n"


def cmd_window(args, out):
    p = _params(args)
    win = transition_window(p)
    for key, val in (("lambda_c", win.lambda_c), ("lambda_star", win.lambda_star),
                     ("kappa_c", win.kappa_c)):
        out.write(f"{key}: {_fmt(val)}\n")
    out.write(_window_line(p, win))


def cmd_ed(args, out):
    p = _params(args)
    kind = BasisKind(args.basis)
    if args.nmax is not None:
        res = solve_fixed(p, args.nmax, kind, count=2, tol=args.tol)
    else:
        res = converge_truncation(p, kind, e_tol=args.etol, n_start=args.nstart,
                                  n_step=args.nstep, n_cap=args.ncap, tol=args.tol)
    rep = report(p, res)
    for key, val in (("e0", res.e0), ("e1", res.e1), ("e0_per_atom", rep.e0_per_atom),
                     ("e0_shifted_per_atom", rep.e0_shifted_per_atom),
                     ("photon_density", rep.photon_density), ("jz_order", rep.jz_order),
                     ("gap", rep.gap), ("parity", rep.parity), ("n_max_used", res.n_max_used),
                     ("residual", res.residual)):
        out.write(f"{key}: {_fmt(val)}\n")


def _spec(args, **extra) -> sweep.SweepSpec:
    axis_name = "lambda_ratio" if args.command == "sweep-energy" else "sqrt_delta_kappa"
    kw = dict(
        axis=sweep.Axis(axis_name, args.start, args.stop, args.count, args.spacing),
        omega=args.omega, delta=args.delta, omega_aa=args.omega_aa,
    )
    if hasattr(args, "atoms"):
        kw.update(atoms=args.atoms, basis=BasisKind(args.basis), e_tol=args.etol, tol=args.tol,
                  h_fraction=args.step, workers=args.workers, timing=args.timing)
    kw.update(extra)
    return sweep.SweepSpec(**kw)


_FLAG_NAMES = {"lam": "lambda", "omega_aa": "Omega", "n_atoms": "atoms"}


def _config_echo(args) -> dict:
    """Resolved settings keyed by flag name, so the echo doubles as a config file."""
    skip = {"command", "output", "config"}
    return {_FLAG_NAMES.get(k, k): (v.value if hasattr(v, "value") else
                                    ",".join(map(str, v)) if isinstance(v, tuple) else v)
            for k, v in vars(args).items() if k not in skip}


def _table(args, rows, columns, out):
    cols = sweep.columns_for(rows, columns)
    if args.format == "json":
        text = sweep.render_json(rows, cols)
    else:
        text = sweep.render_csv(rows, cols, meta=_config_echo(args))
    _emit(args, text, out)


def cmd_sweep_energy(args, out):
    spec = _spec(args, kappa=args.kappa)
    rows = sweep.energy_sweep(spec)
    _table(args, rows, sweep.ENERGY_COLUMNS, out)
    return _row_status(rows)


def cmd_sweep_phase(args, out):
    rows = sweep.phase_diagram_meanfield(_spec(args))
    _table(args, rows, sweep.MEANFIELD_COLUMNS, out)


def cmd_sweep_phase_finite(args, out):
    spec = _spec(args, bracket=(args.lo, args.hi), points=args.points, rounds=args.rounds)
    rows = sweep.phase_diagram_finite(spec)
    _table(args, rows, sweep.FINITE_COLUMNS, out)
    return _row_status(rows)


def _row_status(rows):
    bad = [r for r in rows if r.get("status") != "ok"]
    if bad:
        sys.stderr.write(f"{len(bad)} of {len(rows)} rows failed; see the status column\n")
    return EXIT_OK


def cmd_dump_matrix(args, out):
    op = build(_params(args), args.nmax, BasisKind(args.basis))
    buf = io.StringIO()
    op.dump(buf)
    _emit(args, buf.getvalue(), out)


COMMANDS = {
    "meanfield": cmd_meanfield,
    "window": cmd_window,
    "ed": cmd_ed,
    "sweep-energy": cmd_sweep_energy,
    "sweep-phase": cmd_sweep_phase,
    "sweep-phase-finite": cmd_sweep_phase_finite,
    "dump-matrix": cmd_dump_matrix,
}


def run_cli(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
        code = COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"extdicke: error: {exc}\n")
        return EXIT_INVALID
    except (ConvergenceError, TruncationError, BracketError) as exc:
        sys.stderr.write(f"extdicke: solver failure: {exc}\n")
        return EXIT_SOLVER
    except (ValueError, WindowCollapsed, DimensionError, NotImplementedError) as exc:
        sys.stderr.write(f"extdicke: error: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK if code is None else code


def main():
    sys.exit(run_cli())
