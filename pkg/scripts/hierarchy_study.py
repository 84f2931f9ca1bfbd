#!/usr/bin/env python3
"""Hierarchy behaviour on random box-constrained instances.

Draws random signomials over random boxes, computes the level-0..p lower
bounds plus a brute-force grid value, and reports how often each level closes
the gap.  Useful for eyeballing tightness and solve health at scale.
"""

import argparse
import time

import numpy as np

from sigcert import Box, Signomial, default_backend, grid_oracle, sage_bound


def random_instance(rng, max_terms, dim, exp_range):
    steps = int(round(2 * exp_range))
    while True:
        terms = int(rng.integers(2, max_terms + 1))
        exps = rng.integers(-steps, steps + 1, size=(terms, dim)) * 0.5
        if len({tuple(r) for r in exps}) == terms:
            break
    coeffs = rng.uniform(-2.0, 2.0, size=terms)
    lo = rng.uniform(-2.0, 1.0, size=dim)
    hi = np.minimum(lo + rng.uniform(0.25, 2.0, size=dim), 2.0)
    return Signomial(exps, coeffs), Box(lo, hi)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=25)
    parser.add_argument("--p-max", type=int, default=2)
    parser.add_argument("--terms", type=int, default=4)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--exp-range", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--resolution", type=float, default=5e-3)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    backend = default_backend()
    levels = list(range(args.p_max + 1))

    header = "  ".join(f"p={p}" + " " * 7 for p in levels)
    print(f"{'#':>3}  {header}  oracle        gap@p{args.p_max}")
    gaps = []
    failures = 0
    started = time.perf_counter()
    for k in range(args.instances):
        f, X = random_instance(rng, args.terms, args.dim, args.exp_range)
        bounds = []
        for p in levels:
            res = sage_bound(f, X, p, backend)
            bounds.append(res.bound if res.status == "optimal" else None)
            if res.status != "optimal":
                failures += 1
        oracle = grid_oracle(f, X, args.resolution)
        cells = "  ".join("  --      " if b is None else f"{b:+.6f}" for b in bounds)
        last = bounds[-1]
        gap = None if last is None else oracle - last
        gaps.append(gap)
        print(f"{k:>3}  {cells}  {oracle:+.6f}  {'--' if gap is None else f'{gap:.2e}'}")

    elapsed = time.perf_counter() - started
    solved = [g for g in gaps if g is not None]
    closed = sum(1 for g in solved if g <= 1e-5)
    print(
        f"\n{len(solved)}/{args.instances} instances solved at every level "
        f"({failures} solver failures); gap <= 1e-5 at p={args.p_max} for "
        f"{closed}/{len(solved)}; {elapsed:.1f}s total"
    )


if __name__ == "__main__":
    main()
