"""
Numba vs pure-numpy kernels.

    python benchmarks/bench_backends.py [--repeat 5]

Times the Euler-Maruyama block, the absorbing passage block and the
increment log-likelihood on identical inputs for both backends, checks the
outputs agree, and prints a table of best-of-N wall times.
"""
import argparse
import time

import numpy as np

from severity_sde import _accel, _kernels
from severity_sde.model import PANEL_C


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    c = PANEL_C.coefficients
    n_traj, n_steps = 256, 2048
    eta = rng.standard_normal((n_traj, n_steps))
    x0 = rng.uniform(0.0, 1.0, n_traj)

    def em(kernel):
        x = x0.copy()
        rec = np.empty((n_traj, n_steps // 8))
        kernel(x, eta, *c, 0.01, 8, rec)
        return rec

    def passage(kernel):
        x = np.full(n_traj, 0.1)
        hit = np.full(n_traj, -1, dtype=np.int64)
        kernel(x, eta, *c, 0.01, 0.7, 0, n_steps, hit)
        return hit

    n_rec = 1_000_000
    xs = rng.uniform(0.05, 0.95, n_rec)
    dxs = rng.normal(0.0, 0.01, n_rec)
    dts = np.full(n_rec, 0.01)

    def loglik(kernel):
        return kernel(xs, dxs, dts, *c)

    return [
        ("em_block  256x2048", em, _kernels.em_block_jit, _kernels.em_block_numpy, np.array_equal),
        ("passage   256x2048", passage, _kernels.passage_block_jit, _kernels.passage_block_numpy, np.array_equal),
        ("loglik    1e6 recs", loglik, _kernels.loglik_jit, _kernels.loglik_numpy,
         lambda a, b: np.isclose(a, b, rtol=1e-12)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.Generator(np.random.Philox(key=0))
    print(f"{'kernel':<20}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, run, jit, ref, same in cases(rng):
        run(jit)  # compile outside the timing
        agree = same(run(jit), run(ref))
        t_jit = best_of(lambda: run(jit), args.repeat)
        t_ref = best_of(lambda: run(ref), args.repeat)
        print(f"{name:<20}{1e3 * t_jit:>12.2f}{1e3 * t_ref:>12.2f}{t_ref / t_jit:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
