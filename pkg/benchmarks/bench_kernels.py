"""Compare the numba and numpy kernels on toy-sized inputs.

    python3 benchmarks/bench_kernels.py [--pairs 2000] [--repeat 3]

Numba timings exclude the first (compiling) call.
"""

import argparse
import time

import numpy as np

from pairforge import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    pairs = [(rng.integers(0, 50, rng.integers(5, 30)), rng.integers(0, 50, rng.integers(5, 30)))
             for _ in range(args.pairs)]
    # E-step input: one segment per target word, 8 candidate links each
    n_params = 5000
    seg_len = np.full(20 * args.pairs, 8, dtype=np.int64)
    param_idx = rng.integers(0, n_params, seg_len.sum())
    t = rng.random(n_params) + 1e-3

    cases = {
        "levenshtein": (lambda: [kernels.levenshtein_numba(a, b) for a, b in pairs],
                        lambda: [kernels.levenshtein_numpy(a, b) for a, b in pairs]),
        "edit_ops": (lambda: [kernels.edit_ops_numba(a, b) for a, b in pairs],
                     lambda: [kernels.edit_ops_numpy(a, b) for a, b in pairs]),
        "em_estep": (lambda: kernels.em_estep_numba(t, param_idx, seg_len, n_params),
                     lambda: kernels.em_estep_numpy(t, param_idx, seg_len, n_params)),
    }
    print(f"{'kernel':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, (fast, slow) in cases.items():
        fast()  # compile
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<12} {tf:>10.4f} {ts:>10.4f} {ts / tf:>8.1f}x")


if __name__ == "__main__":
    main()
