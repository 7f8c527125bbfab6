"""Time the compiled kernel core against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 100] [--repeat 2000]

Each timed call builds the proposal covariance at a pose from ``n`` history
points and evaluates one Gaussian log-density, the inner loop of every
Kameleon step.
"""

import argparse
import timeit

import numpy as np

from graspmc import _kernels_py
from graspmc.geometry import embed, random_pose

try:
    from graspmc import _kernels_c
except ImportError:
    _kernels_c = None


def bench(mod, y, Z, x, repeat):
    def step():
        C = mod.proposal_covariance_at(y, Z, 1.0, 0.16, 0.5, 0.08, 1e-5, 0.97)
        mod.mvn_logpdf(x, y, C)

    step()
    return min(timeit.repeat(step, number=repeat, repeat=3)) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100, help="history subsample size")
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    y = embed(random_pose(rng, 0.2))
    Z = np.array([embed(random_pose(rng, 0.2)) for _ in range(args.n)])
    x = embed(random_pose(rng, 0.2))

    t_py = bench(_kernels_py, y, Z, x, args.repeat)
    print(f"python  {t_py * 1e6:9.1f} us/step")
    if _kernels_c is None:
        print("cython  (extension not built)")
        return
    t_c = bench(_kernels_c, y, Z, x, args.repeat)
    print(f"cython  {t_c * 1e6:9.1f} us/step   speedup {t_py / t_c:.1f}x")


if __name__ == "__main__":
    main()
