"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--atoms 512] [--nmax 16] [--repeat 20] [--solve]

``--solve`` also times a full truncation-converged ground-state solve under each
backend; the backend is chosen at import, so each runs in its own interpreter.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from extdicke import _pykernels
from extdicke.hamiltonian import build_displaced
from extdicke.model import ModelParams

try:
    from extdicke import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--atoms", type=int, default=512)
    ap.add_argument("--nmax", type=int, default=16)
    ap.add_argument("--block", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--solve", action="store_true")
    args = ap.parse_args()

    p = ModelParams(1.0, 1.0, 0.7, -0.2, 0.5, args.atoms)
    op = build_displaced(p, args.nmax)
    x = np.random.default_rng(0).standard_normal((op.dim, args.block))
    print(f"operator: dim={op.dim} stored entries={op.nnz}")

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled extension not built; only the fallback is timed")

    ref = None
    for name, mod in backends:
        out = np.empty_like(x)
        t = best_of(lambda: mod.symv_lower(op.rows, op.cols, op.vals, x, out), args.repeat)
        if ref is None:
            ref = out.copy()
        err = np.max(np.abs(out - ref))
        t_ov = best_of(lambda: mod.displacement_overlaps(0.3, 64), args.repeat)
        print(f"{name:>7}: symv {t * 1e3:8.3f} ms   overlaps(n=64) {t_ov * 1e3:8.3f} ms   "
              f"max|diff| vs python {err:.1e}")

    if args.solve:
        code = (
            "import time; from extdicke import kernels; "
            "from extdicke.eigensolve import converge_truncation; "
            "from extdicke.model import ModelParams; "
            f"p = ModelParams(1.0, 1.0, 0.7, -0.2, 0.5, {args.atoms}); "
            "t = time.perf_counter(); r = converge_truncation(p, count=1); "
            "print(f'{kernels.BACKEND:>7}: solve {time.perf_counter() - t:8.3f} s   e0 {r.e0:.15f}')"
        )
        sys.stdout.flush()
        for name, _ in backends:
            env = dict(os.environ)
            env.pop("EXTDICKE_PURE_PYTHON", None)
            if name == "python":
                env["EXTDICKE_PURE_PYTHON"] = "1"
            subprocess.run([sys.executable, "-c", code], env=env, check=True)


if __name__ == "__main__":
    main()
