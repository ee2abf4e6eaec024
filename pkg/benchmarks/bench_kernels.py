"""Compiled kernels against the numpy fallback, plus one end-to-end run.

    python benchmarks/bench_kernels.py [--repeat 5]

The end-to-end number integrates the ball for 2000 RK4 steps in a child
process per backend (the backend is fixed at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nhreduce import _kernels_py

try:
    from nhreduce import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import time
import numpy as np
from nhreduce import BACKEND, build_example, integrate
ex = build_example("chaplygin_ball")
t = time.perf_counter()
integrate(ex.system, ex.trajectory_state(), 1e-3, 2.0)
print(BACKEND, time.perf_counter() - t)
"""


def cases(rng):
    n = 12
    Da = rng.normal(size=(n, n))
    al = rng.normal(size=n)
    C = rng.normal(size=(n, n, n))
    C = C - C.transpose(0, 2, 1)
    w = rng.normal(size=3)
    R = np.linalg.qr(rng.normal(size=(3, 3)))[0] + 1e-3 * rng.normal(size=(3, 3))
    A = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    b = rng.normal(size=6)
    y = rng.normal(size=40)
    ks = [rng.normal(size=40) for _ in range(4)]
    return {
        "exterior_assemble": lambda m: m.exterior_assemble(Da, al, C),
        "expm_so3": lambda m: m.expm_so3(w),
        "polar_so3": lambda m: m.polar_so3(R),
        "small_solve": lambda m: m.small_solve(A, b),
        "rk4_combine": lambda m: m.rk4_combine(y, *ks, 1e-3),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    ap.add_argument("--no-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(rng).items():
        diff = float(np.max(np.abs(np.asarray(fn(_kernels_py)) - np.asarray(fn(_ckernels)))))
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=args.number, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=args.number, repeat=args.repeat))
        us = 1e6 / args.number
        print(f"{name:<20}{tp * us:>14.2f}{tc * us:>14.2f}{tp / tc:>10.1f}{diff:>12.1e}")
    if not args.no_end_to_end:
        print()
        for pure in ("1", "0"):
            env = dict(os.environ, NHREDUCE_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            print(f"ball, 2000 RK4 steps, {out[0]:<7} backend: {float(out[1]):.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
