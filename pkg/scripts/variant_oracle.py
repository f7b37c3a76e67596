"""Which closed-form eigenvalue equation matches the fitted boundary condition."""
import argparse
import math

import numpy as np

from adsdyn.atlas import sample_admissible
from adsdyn.spectrum import VARIANTS, eigenvalue_condition_oracle, find_roots


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print("a0,a1,a2,variant,lambda,oracle")
    for _ in range(args.samples):
        a = sample_admissible(rng)
        for var in VARIANTS:
            for x in find_roots(a, var):
                lam = math.sqrt(x)
                if 1e-3 < lam < 1e3:
                    r = eigenvalue_condition_oracle(a, lam)
                    print(f"{a.a0:.6g},{a.a1:.6g},{a.a2:.6g},{var},{lam:.6g},{r:.3e}")


if __name__ == "__main__":
    main()
