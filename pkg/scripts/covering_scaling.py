"""Greedy selection runtime, selection size and empirical dilation factor against family size."""

import argparse
import time

from capsulelab import covering
from capsulelab.verification import random_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000, 3000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'n':>6} {'selected':>9} {'seconds':>8} {'disjoint':>9} {'empirical K':>12}")
    for n in args.sizes:
        fam = random_family(n, args.seed, box=10.0 * (n / 1000) ** (1 / 3))
        t0 = time.perf_counter()
        sel = covering.vitali_select(fam)
        dt = time.perf_counter() - t0
        rep = covering.coverage_check(sel, fam, 1.0)
        print(f"{n:6d} {len(sel.selected):9d} {dt:8.3f} {str(sel.disjoint):>9} {rep.empirical_K:12.4f}")


if __name__ == "__main__":
    main()
