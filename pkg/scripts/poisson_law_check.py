#!/usr/bin/env python3
"""Empirical count law of the seeded Poisson sampler vs the exact pmf."""

import argparse
import math

import numpy as np

import percohom as ph
from percohom.rng import substream_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--intensity", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=10**4)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--dim", type=int, default=3, choices=(2, 3))
    args = ap.parse_args()

    box = ph.Box.unit(args.dim)
    counts = np.array([ph.sample_poisson(box, args.intensity,
                                         substream_seed(args.seed, "poisson-law", i)).count
                       for i in range(args.seeds)])
    lam = args.intensity * box.volume
    print(f"intensity {args.intensity}, {args.seeds} seeds")
    print(f"{'k':>5} {'observed':>10} {'expected':>12}")
    for k in range(8):
        expected = math.exp(-lam) * lam**k / math.factorial(k) * args.seeds
        print(f"{k:>5} {(counts == k).sum():>10} {expected:>12.1f}")
    print(f"mean {counts.mean():.4f} (exact {lam}), var {counts.var():.4f}")


if __name__ == "__main__":
    main()
