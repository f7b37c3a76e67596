"""Energy drift of the generalized evolution under grid refinement."""
import argparse
import math

import numpy as np

from adsdyn.evolve import evolve
from adsdyn.fields import sample


def drift(alpha, n, L, m, T):
    f = sample(lambda z: np.clip(1 - (z - 3.0) ** 2, 0, None) ** 4, L, n)
    tr = evolve(f, f.like(np.zeros(n)), alpha, m, T, 0.5 * L / n, sample_every=max(1, n // 400))
    E = tr.energy_totals()
    return float(np.max(np.abs(E - E[0])) / abs(E[0]))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", default="0.8,0.05,0")
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--L", type=float, default=20.0)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 2000, 4000])
    args = ap.parse_args()
    alpha = tuple(float(x) for x in args.alpha.split(","))
    prev = None
    print("n,h,drift,order")
    for n in args.n:
        d = drift(alpha, n, args.L, args.m, args.T)
        order = "" if prev is None else f"{math.log2(prev / d):.2f}"
        print(f"{n},{args.L / n:.4g},{d:.3e},{order}")
        prev = d


if __name__ == "__main__":
    main()
