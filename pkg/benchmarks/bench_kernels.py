#!/usr/bin/env python3
"""Timing comparison of the compiled SE(3) kernels against the numpy fallback.

Checks numerical parity first, then reports best-of-five wall times for the
two hot kernels at a few realistic sizes.  Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from vocl._kernels import se3_numpy

try:
    from vocl._kernels import _se3
except ImportError:
    _se3 = None


def random_window(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    t = rng.normal(size=(n, 3))
    return q, t


def best_time(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def bench(label, make_args, call, number):
    rng = np.random.default_rng(0)
    args = make_args(rng)
    ref = call(se3_numpy, *args)
    if _se3 is not None:
        got = call(_se3, *args)
        ref_a, got_a = np.asarray(ref), np.asarray(got)
        err = np.max(np.abs(ref_a - got_a) / np.maximum(1.0, np.abs(ref_a)))
        assert err < 1e-12, f"{label}: backends disagree by {err} (relative)"
    t_np = best_time(lambda: call(se3_numpy, *args), number)
    if _se3 is None:
        print(f"{label:<34} numpy {t_np * 1e6:9.1f} us   (compiled ext not built)")
        return
    t_c = best_time(lambda: call(_se3, *args), number)
    print(
        f"{label:<34} numpy {t_np * 1e6:9.1f} us   compiled {t_c * 1e6:9.1f} us"
        f"   speedup {t_np / t_c:5.1f}x"
    )


def main():
    print(f"compiled extension available: {_se3 is not None}")
    for n in (10, 40):
        bench(
            f"pairwise_pose_loss, {n} poses",
            lambda rng, n=n: (*random_window(rng, n), *random_window(rng, n)),
            lambda m, gq, gt, pq, pt: m.pairwise_pose_loss(gq, gt, pq, pt),
            number=200,
        )
    for n in (100, 2000):
        bench(
            f"motion_extrema, {n} poses",
            lambda rng, n=n: random_window(rng, n),
            lambda m, q, t: m.motion_extrema(q, t),
            number=200,
        )


if __name__ == "__main__":
    main()
