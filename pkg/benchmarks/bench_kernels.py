"""Time the compiled kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]

Prints one line per kernel and size with the best wall time of each
implementation and the speed-up.
"""

import argparse
import time

import numpy as np
from scipy.spatial.distance import cdist

from hiref import _fallback

try:
    from hiref import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def sinkhorn_case(n, rng, r=None):
    # square: dense entropic OT; narrow (r columns): the low-rank inner projection
    r = n if r is None else r
    x, y = rng.random((n, 2)), rng.random((r, 2))
    log_k = np.ascontiguousarray(-cdist(x, y, "sqeuclidean") / 0.05)
    a, b = np.full(n, 1.0 / n), np.full(r, 1.0 / r)

    def make(impl):
        return lambda: impl.sinkhorn_rect(log_k, a, b, np.zeros(r), 1e-12, 50)
    return make


def narrow_sinkhorn_case(n, rng):
    return sinkhorn_case(n, rng, r=4)


def lsap_case(n, rng):
    c = rng.random((n, n))

    def make(impl):
        return lambda: impl.lsap(c)
    return make


def greedy_case(n, rng):
    r = 16
    w = rng.random((n, r))
    order = rng.permutation(n).astype(np.int64)
    caps = np.full(r, n // r, dtype=np.int64)

    def make(impl):
        return lambda: impl.greedy_capacity(w, order, caps)
    return make


CASES = [
    ("sinkhorn_rect x50", sinkhorn_case, (256, 1024)),
    ("sinkhorn_rect r=4", narrow_sinkhorn_case, (256, 4096, 65536)),
    ("lsap", lsap_case, (64, 256)),
    ("greedy_capacity", greedy_case, (4096, 65536)),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>8}{'compiled s':>14}{'numpy s':>12}{'speed-up':>10}")
    for name, case, sizes in CASES:
        for n in sizes:
            make = case(n, rng)
            fast = best_time(make(_kernels), args.repeat)
            slow = best_time(make(_fallback), args.repeat)
            print(f"{name:<20}{n:>8}{fast:>14.4f}{slow:>12.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
