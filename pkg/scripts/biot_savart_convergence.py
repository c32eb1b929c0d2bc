"""Curl-inversion error of the cut-off Biot-Savart velocity against quadrature order."""

import argparse
import time

from capsulelab.verification import biot_savart_decay, biot_savart_inversion


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--grid", type=int, default=12)
    args = ap.parse_args()
    for order in args.orders:
        t0 = time.perf_counter()
        err, _ = biot_savart_inversion(n=args.grid, order=order)
        print(f"order {order:2d}: relative L2 error {err:.4%} ({time.perf_counter() - t0:.1f}s)")
    exponent, radii, mags = biot_savart_decay()
    print(f"far-field decay exponent {exponent:.4f}")
    for r, m in zip(radii, mags):
        print(f"  |x| = {r:6.0f}: |v| = {m:.4e}")


if __name__ == "__main__":
    main()
