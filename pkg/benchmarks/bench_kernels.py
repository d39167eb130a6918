"""Time each kernel under both backends on realistic sizes.

    python benchmarks/bench_kernels.py [--repeat 20]

Numba versions are called once before timing so compilation is excluded.
The last column is numpy time divided by numba time.
"""

import argparse
import timeit

import numpy as np

from flowmots import kernels


def cases(rng):
    C, H, W = 5, 160, 192
    feat = rng.normal(size=(C, H, W))
    yy, xx = np.mgrid[0:H, 0:W]
    ys = (yy + rng.uniform(-3, 3, (H, W))).ravel()
    xs = (xx + rng.uniform(-3, 3, (H, W))).ravel()

    mask = np.zeros((H, W), dtype=bool)
    mask[40:90, 30:110] = True
    other = np.roll(mask, (7, 11), axis=(0, 1))
    flat = np.ascontiguousarray(mask.ravel(order="F"))
    ca = kernels.encode_counts_numpy(flat)
    cb = kernels.encode_counts_numpy(np.ascontiguousarray(other.ravel(order="F")))
    noisy = np.ascontiguousarray((rng.random(H * W) < 0.5))

    P = rng.normal(size=(16, C))
    gram = P.T @ P
    a = rng.normal(size=(C, H, W))
    b = rng.normal(size=(C, H, W))

    return [
        ("bilinear_sample", (feat, ys, xs)),
        ("encode_counts", (flat,)),
        ("encode_counts (noisy)", (noisy,), "encode_counts"),
        ("decode_counts", (ca, H * W)),
        ("intersection_area", (ca, cb, H * W)),
        ("gram_cosine", (a, b, gram)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':24s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for case in cases(rng):
        label, call_args = case[0], case[1]
        name = case[2] if len(case) > 2 else label
        fast = getattr(kernels, f"{name}_numba")
        slow = getattr(kernels, f"{name}_numpy")
        fast(*call_args)  # compile
        np.testing.assert_allclose(
            np.asarray(fast(*call_args), dtype=float), np.asarray(slow(*call_args), dtype=float), atol=1e-9
        )
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat))
        print(f"{label:24s} {t_fast * 1e3:10.3f} {t_slow * 1e3:10.3f} {t_slow / t_fast:8.2f}x")


if __name__ == "__main__":
    main()
