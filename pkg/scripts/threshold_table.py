"""Exact integrability exponents across oscillation and line-integral parameters."""

import argparse
from fractions import Fraction as F

from capsulelab import functionals as fn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--denominator", type=int, default=18)
    args = ap.parse_args()
    d = args.denominator
    print(f"{'a':>8} {'p_alpha':>10} {'p_alpha_sigma':>14} {'p_beta':>12}")
    for i in range(0, d // 2 + 1):
        a = F(i, d)
        t = fn.thresholds(fn.ExponentInputs(alpha=a, beta=a))
        print(f"{str(a):>8} {str(t.p_alpha):>10} {str(t.p_alpha_sigma):>14} {str(t.p_beta):>12}")
    t = fn.thresholds(fn.ExponentInputs())
    print(f"critical alpha {t.alpha_crit}, critical beta {t.beta_crit}")
    print(f"crossovers at a = 1/9: s = {fn.seregin_crossover()} and s = {fn.chae_wolf_crossover()}")
    for s in (4, F(9, 2), 6, 7, 9, 20):
        c = fn.competitor_exponents(s)
        print(f"s = {str(s):>4}: {c['seregin_alpha']!s:>8} {c['chae_wolf_alpha']!s:>8}")


if __name__ == "__main__":
    main()
