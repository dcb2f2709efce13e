"""Time the compiled kernels against their numpy formulations.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Run without SIMCSUM_DISABLE_NUMBA, otherwise the "jit" column is plain Python.
"""

import argparse
import timeit

import numpy as np

from simcsum import kernels as K


def cases(rng):
    a = rng.integers(0, 50, 400)
    b = rng.integers(0, 50, 400)
    ids = rng.integers(0, 300, 5000)
    hyps = rng.integers(0, 40, (8, 120))
    weights = rng.integers(1, 40, 20)
    return [
        ("lcs_length 400x400", K.lcs_length_jit, K._lcs_length_numpy, (a, b)),
        ("mtld_factor_count n=5000", K.mtld_factor_count_jit, K._mtld_factor_count_numpy, (ids, 300, 0.72)),
        ("trigram_ban_mask 8x120", K.trigram_ban_mask_jit, K._trigram_ban_mask_numpy, (hyps, 1000)),
        ("subset_sum_counts n=20", K.subset_sum_counts_jit, K._subset_sum_counts_numpy, (weights, 10)),
    ]


def best_of(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"numba enabled: {K.NUMBA_ENABLED}")
    print(f"{'kernel':28s} {'jit (us)':>12s} {'numpy (us)':>12s} {'speedup':>9s}")
    for name, jit_fn, np_fn, call in cases(np.random.default_rng(args.seed)):
        out_j, out_n = jit_fn(*call), np_fn(*call)  # also warms up compilation
        assert np.array_equal(np.asarray(out_j), np.asarray(out_n)), name
        tj = best_of(jit_fn, call, args.repeat)
        tn = best_of(np_fn, call, args.repeat)
        print(f"{name:28s} {tj * 1e6:12.1f} {tn * 1e6:12.1f} {tn / tj:8.1f}x")


if __name__ == "__main__":
    main()
