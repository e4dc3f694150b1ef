"""Time the compiled walk kernel against the numpy fallback.

Usage: python benchmarks/bench_core.py [--walkers N] [--repeat K]

Both backends receive identical pre-drawn flights, so the table also
reports the largest position difference between them.
"""

import argparse
import time

import numpy as np

from dronemob import kernels
from dronemob.mobility import RW, RWP, displacements
from dronemob.stochastic import Exponential, Rayleigh, Rng


def _kernel_inputs(n, k, hover, seed):
    gen = np.random.default_rng(seed)
    lengths = Rayleigh.from_mean(500.0).sample(gen, (n, k))
    angles = gen.uniform(0.0, 2.0 * np.pi, (n, k))
    hovers = gen.exponential(5.0, (n, k)) if hover else np.zeros((n, k))
    return [np.ascontiguousarray(a, dtype=float) for a in (lengths, angles, hovers)]


def _run_kernel(advance, inputs, times):
    n = inputs[0].shape[0]
    x, y, clock = np.zeros(n), np.zeros(n), np.zeros(n)
    tidx = np.zeros(n, dtype=np.int64)
    ox, oy = np.empty((n, times.size)), np.empty((n, times.size))
    advance(*inputs, 12.5, times, x, y, clock, tidx, ox, oy)
    return ox, oy


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--walkers", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = {"python": kernels.get_backend("python")[1]}
    try:
        backends["compiled"] = kernels.get_backend("compiled")[1]
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")

    times = np.array([50.0, 100.0, 300.0])
    print(f"{'case':<28}{'backend':<10}{'seconds':>10}{'speedup':>10}{'max |dx|':>12}")
    for hover in (False, True):
        inputs = _kernel_inputs(args.walkers, 16, hover, seed=1)
        label = f"kernel {'RWP' if hover else 'RW'} n={args.walkers}"
        ref_t, ref = _best(lambda: _run_kernel(backends["python"], inputs, times), args.repeat)
        print(f"{label:<28}{'python':<10}{ref_t:>10.4f}{1.0:>10.2f}{0.0:>12.2e}")
        if "compiled" in backends:
            t, out = _best(lambda: _run_kernel(backends["compiled"], inputs, times), args.repeat)
            diff = max(np.max(np.abs(out[0] - ref[0])), np.max(np.abs(out[1] - ref[1])))
            print(f"{label:<28}{'compiled':<10}{t:>10.4f}{ref_t / t:>10.2f}{diff:>12.2e}")

    models = {
        "RW": RW(12.5, Rayleigh.from_mean(500.0)),
        "RWP": RWP(12.5, Rayleigh.from_mean(500.0), Exponential(5.0)),
    }
    for name, model in models.items():
        label = f"displacements {name} n={args.walkers}"
        run = {b: (lambda b=b: displacements(model, times, args.walkers, Rng(7), backend=b)) for b in backends}
        ref_t, ref = _best(run["python"], args.repeat)
        print(f"{label:<28}{'python':<10}{ref_t:>10.4f}{1.0:>10.2f}{0.0:>12.2e}")
        if "compiled" in backends:
            t, out = _best(run["compiled"], args.repeat)
            print(f"{label:<28}{'compiled':<10}{t:>10.4f}{ref_t / t:>10.2f}{np.max(np.abs(out - ref)):>12.2e}")


if __name__ == "__main__":
    main()
