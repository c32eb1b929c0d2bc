"""Residual, gradient-bound and mixed-norm sweeps for the drift kernel; writes CSV tables."""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from capsulelab import kernels
from capsulelab.verification import random_shell


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/kernel")
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    x = random_shell(args.points, 0.01, 100.0, args.seed)
    r = np.linalg.norm(x, axis=1)
    with open(out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["U", "r", "relative_residual", "gradient_ratio"])
        for U in (0.0, 0.1, 1.0, 10.0, 100.0):
            k = kernels.OseenKernel(1.0, U)
            res = kernels.relative_residual(k, x)
            ratio = np.linalg.norm(kernels.grad_gamma(k, x), axis=-1) / kernels.gradient_bound(k, x)
            for row in zip(np.full(len(r), U), r, res, ratio):
                w.writerow([f"{v:.17g}" for v in row])
            print(f"U={U:g}: max residual {res.max():.2e}, max |grad G|/bound {ratio.max():.4f}")

    with open(out / "mixed_norm.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "integral", "integral_times_abs_x1", "closed_form_8pi_over_x1"])
        for x1 in np.concatenate([-np.geomspace(10, 0.01, 7), np.geomspace(0.01, 10, 7)]):
            v = kernels.mixed_norm_bound(float(x1))
            w.writerow([f"{x1:.6g}", f"{v:.17g}", f"{v * abs(x1):.17g}", f"{8 * math.pi / x1:.17g}" if x1 > 0 else ""])
            print(f"x1={x1:9.4g}: integral*|x1| = {v * abs(x1):.10f}")

    with open(out / "delta_normalization.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["U", "r", "flux"])
        for U in (0.0, 1.0, 10.0):
            for rr in np.geomspace(1e-4, 10, 11):
                w.writerow([U, f"{rr:.6g}", f"{kernels.delta_normalization(kernels.OseenKernel(1.0, U), rr):.17g}"])


if __name__ == "__main__":
    main()
