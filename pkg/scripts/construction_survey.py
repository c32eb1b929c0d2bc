"""Construct capsules on a lattice and summarise the round/long split and root residuals."""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from capsulelab import construction, fields


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--field", default="gaussian_curl")
    ap.add_argument("--n", type=int, default=3, help="lattice points per axis")
    ap.add_argument("--half-width", type=float, default=1.5)
    ap.add_argument("--eps0", type=float, default=0.01)
    ap.add_argument("--out", default="results/construction")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    vf = fields.make_field(args.field)
    ax = np.linspace(-args.half_width, args.half_width, args.n)
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    params = construction.CapsuleParams(eps0=args.eps0, eps1=args.eps0 / 100)
    t0 = time.perf_counter()
    fam = construction.classify_points(vf, pts, params)
    elapsed = time.perf_counter() - t0
    with open(out / "capsules.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "R", "L", "U", "xi", "class", "unbounded", "residual"])
        for p, cc in zip(pts, fam.results):
            if cc is None:
                continue
            w.writerow([*p, cc.R, cc.L, cc.U, cc.xi, cc.classification, cc.unbounded, cc.residual])
    built = [c for c in fam.constructed() if not c.unbounded]
    print(f"{len(pts)} points in {elapsed:.1f}s: {len(fam.round)} round, {len(fam.long)} long, {len(fam.unbounded)} unbounded, {len(fam.errors)} failed")
    if built:
        print(f"max residual / eps0 = {max(c.residual for c in built) / args.eps0:.2e}")
        print(f"radius range [{min(c.R for c in built):.4g}, {max(c.R for c in built):.4g}]")


if __name__ == "__main__":
    main()
