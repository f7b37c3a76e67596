"""Projected vs closed-form graviton amplitude for data e + bump, 0.5 e."""
import argparse

import numpy as np

from adsdyn.evolve import evolve, make_geometry
from adsdyn.fields import VCoords, sample
from adsdyn.synth import graviton_data, graviton_split


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", default="0.8,0.05,0")
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--L", type=float, default=20.0)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--T", type=float, default=10.0)
    args = ap.parse_args()
    alpha = tuple(float(x) for x in args.alpha.split(","))
    L, n = args.L, args.n
    e = graviton_data(L, n)
    b = VCoords(0, 0, 0, 0, sample(lambda z: np.clip(1 - (z - 3.0) ** 2, 0, None) ** 4, L, n),
                e.cutoff)
    geo = make_geometry(L, n, e.cutoff, right="graviton")
    tr = evolve(e + b, e.scale(0.5), alpha, args.m, args.T, 0.5 * L / n, sample_every=n // 40,
                geo=geo, keep_states=True, with_energy=False)
    s = graviton_split(tr)
    print("t,closed_form,projected,phi2_minus_closed")
    for row in zip(s.times, s.closed_form_amplitude, s.projected_amplitude, s.residual):
        print(",".join(f"{v:.8g}" for v in row))


if __name__ == "__main__":
    main()
