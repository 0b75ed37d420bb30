"""Compare the compiled and numpy integrator kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each case integrates a small system whose right-hand side is a cheap numpy
expression, so the timing is dominated by the stepper loop.
"""
import argparse
import math
import time

import numpy as np

from peravg.kernels import backends


def pendulum(t, y):
    return np.array([y[1], -math.sin(y[0])])


def hopf_rotation(t, y):
    w = 1.0 + 0.25 * (y[0] ** 2 + y[1] ** 2 - y[2] ** 2 - y[3] ** 2)
    return w * np.array([-y[1], y[0], -y[3], y[2]])


CASES = {
    "dopri5 pendulum, t in [0, 200], tol 1e-10":
        lambda k: k.dopri5(pendulum, 0.0, 200.0, [1.0, 0.0], 1e-10, 1e-10),
    "dopri5 sphere rotation, renormalized, t in [0, 100]":
        lambda k: k.dopri5(hopf_rotation, 0.0, 100.0, [0.8, 0.0, 0.6, 0.0], 1e-10, 1e-10,
                           renorm_block=4, renorm_radius=1.0),
    "fixed_rk5 pendulum, 20000 steps":
        lambda k: k.fixed_rk5(pendulum, 0.0, 200.0, [1.0, 0.0], 20000),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    impls = backends()
    print(f"backends: {', '.join(impls)}")
    for label, case in CASES.items():
        cells = [f"{name} {best_of(lambda: case(k), args.repeat) * 1e3:8.1f} ms"
                 for name, k in impls.items()]
        print(f"{label:55s} " + "   ".join(cells))


if __name__ == "__main__":
    main()
