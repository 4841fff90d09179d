"""Compare the compiled ADMM kernel against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 1000,10000,30000]
"""

import argparse
import time

import numpy as np

from hlmrf.admm import AdmmConfig, HAVE_COMPILED_KERNEL, mpe_infer
from hlmrf.oracles import generate_perf_model


def run(model, weights, kernel, warm=None):
    config = AdmmConfig(kernel=kernel)
    start = time.perf_counter()
    _, state, diag = mpe_infer(model, weights, config, warm=warm)
    elapsed = time.perf_counter() - start
    return elapsed, state, diag


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,30000",
                        help="comma-separated potential counts")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    kernels = ["python"]
    if HAVE_COMPILED_KERNEL:
        kernels.insert(0, "compiled")
    else:
        print("note: hlmrf._kernel is not built; benchmarking the fallback only\n")

    header = f"{'potentials':>10} {'kernel':>9} {'cold (s)':>9} {'warm (s)':>9} " \
             f"{'iters':>6} {'it/s':>9} {'energy':>12}"
    print(header)
    print("-" * len(header))
    for size in sizes:
        model, weights = generate_perf_model(size, seed=7)
        perturbed = weights * 1.01
        for kernel in kernels:
            cold_times, warm_times = [], []
            for _ in range(args.repeats):
                elapsed, state, diag = run(model, weights, kernel)
                cold_times.append(elapsed)
                w_elapsed, _, w_diag = run(model, perturbed, kernel, warm=state)
                warm_times.append(w_elapsed)
            cold = min(cold_times)
            warm = min(warm_times)
            rate = diag.iterations / cold
            print(f"{size:>10} {kernel:>9} {cold:>9.3f} {warm:>9.3f} "
                  f"{diag.iterations:>6} {rate:>9.0f} {diag.energy:>12.4f}")
        if len(kernels) == 2:
            c, _, _ = run(model, weights, "compiled")
            p, _, _ = run(model, weights, "python")
            print(f"{'':>10} {'speedup':>9} {p / c:>9.2f}x")


if __name__ == "__main__":
    main()
