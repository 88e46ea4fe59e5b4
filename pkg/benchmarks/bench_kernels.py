"""Time the numba kernels against the pure-numpy fallback.

Runs the three hot loops (plain walking, occupation counting, first
passage) on both backends, checks they produce identical bits, and prints
a speedup table. Numba warmup happens outside the timed region.

Usage: python3 benchmarks/bench_kernels.py [--replicas N] [--steps N] [--best-of K]
"""

import argparse
import time

import numpy as np

from lamperti import SimConfig, passage_time_suite, renewal_estimate, simulate
from lamperti.chains import make_birth_death, make_updrift_birth_death
from lamperti.kernels import get_backend


def best_of(fn, k):
    times = []
    for _ in range(k):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads(args):
    inward = make_birth_death(2.0, 1.0)
    outward = make_updrift_birth_death(2.0, 1.0)

    def walk(backend):
        cfg = SimConfig(seed=11, n_steps=args.steps, n_replicas=args.replicas,
                        x_start=0, backend=backend)
        return simulate(inward, cfg).final_states

    def occupation(backend):
        cfg = SimConfig(seed=13, n_replicas=max(args.replicas // 10, 20),
                        backend=backend)
        est = renewal_estimate(outward, np.arange(1, 81), 20.0, cfg)
        return est.H

    def passage(backend):
        cfg = SimConfig(seed=17, n_steps=50 * args.steps,
                        n_replicas=max(args.replicas // 4, 50),
                        x_start=0, backend=backend)
        rep = passage_time_suite(outward, [60], cfg)
        return rep.mc_means

    return {"walk": walk, "occupation": occupation, "passage": passage}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replicas", type=int, default=2000)
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--best-of", type=int, default=3)
    args = parser.parse_args()

    try:
        get_backend("numba")
    except (ImportError, ValueError) as exc:
        parser.exit(1, f"numba backend unavailable ({exc}); nothing to compare\n")

    print(f"{'workload':<12} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, fn in workloads(args).items():
        fn("numba")  # JIT warmup
        t_np, out_np = best_of(lambda: fn("numpy"), args.best_of)
        t_nb, out_nb = best_of(lambda: fn("numba"), args.best_of)
        if not np.array_equal(out_np, out_nb):
            raise AssertionError(f"{name}: backends disagree")
        print(f"{name:<12} {t_np:>9.3f}s {t_nb:>9.3f}s {t_np / t_nb:>7.1f}x")
    print("outputs identical across backends")


if __name__ == "__main__":
    main()
