"""Compiled kernels versus the numpy fallback.

Times each kernel on samples of several sizes and reports the median of
repeated calls.  Run after building the extension::

    python3 benchmarks/bench_kernels.py [--repeat 50]

The pure-Python side is imported directly, so no environment switch is
needed.  Small samples are where the estimators spend their time (n = 25
to 100 in the simulation study; quadrature rules have 256 to 512 nodes).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from moebxii import _backend, _kernels_py
from moebxii.dist import Params, sample
from moebxii.estimators import obre_solve_Aa

THETA = Params(3.0, 2.0, 2.0)


def cases(n, state):
    lx = np.log(sample(THETA, n, seed=n).values)
    y = np.linspace(0.01, 4.0, n)
    w = np.full(n, 1.0 / n)
    a, c, k = THETA
    A, ctr = state.A, state.a
    return {
        "loglik": lambda K: K.loglik(a, c, k, lx),
        "scores": lambda K: K.scores(a, c, k, lx),
        "ls_objective": lambda K: K.ls_objective(a, c, k, lx, y),
        "obre_psi": lambda K: K.obre_psi(a, c, k, lx, A, ctr, 3.0),
        "obre_moments": lambda K: K.obre_moments(a, c, k, lx, w, A, ctr, 3.0),
    }


END_TO_END = """
import time
from moebxii import BACKEND
from moebxii.dist import Params
from moebxii.sim import Scenario, run_scenario
sc = Scenario(Params(3, 1, 1), 25, 1, replications={reps})
t0 = time.perf_counter()
run_scenario(sc)
print(BACKEND, time.perf_counter() - t0)
"""


def end_to_end(reps):
    """Wall time of one contamination scenario with each backend."""
    out = {}
    for flag in ("", "1"):
        env = dict(os.environ, MOEBXII_PURE_PYTHON=flag)
        line = subprocess.run([sys.executable, "-c", END_TO_END.format(reps=reps)], env=env,
                              capture_output=True, text=True, check=True).stdout.split()
        out[line[0]] = float(line[1])
    return out


def median_time(fn, repeat):
    number = 20
    return float(np.median(timeit.repeat(fn, number=number, repeat=repeat))) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=30)
    ap.add_argument("--sizes", default="25,100,272,1000,10000")
    ap.add_argument("--replications", type=int, default=10,
                    help="replications of the end-to-end scenario (0 to skip)")
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    state = obre_solve_Aa(THETA, 3.0)
    sizes = [int(v) for v in args.sizes.split(",")]
    print(f"{'kernel':<14}{'n':>7}{'python (us)':>14}{'cython (us)':>14}{'speed-up':>10}")
    for n in sizes:
        for name, call in cases(n, state).items():
            t_py = median_time(lambda: call(_kernels_py), args.repeat)
            t_cy = median_time(lambda: call(_backend.compiled), args.repeat)
            print(f"{name:<14}{n:>7}{t_py * 1e6:>14.1f}{t_cy * 1e6:>14.1f}{t_py / t_cy:>10.2f}")
    if args.replications:
        t = end_to_end(args.replications)
        print(f"\nscenario (3,1,1) n=25 o=1, {args.replications} replications, all estimators: "
              f"python {t['python']:.1f}s, cython {t['cython']:.1f}s, "
              f"speed-up {t['python'] / t['cython']:.2f}")


if __name__ == "__main__":
    main()
