"""Left-right crossing frequency of bond or site percolation on an n x n box.

Example:
    python3 scripts/percolation_threshold.py --n 64 128 --structure bond
"""
import argparse

import numpy as np

from rclattice.percolation import crossing_frequency
from rclattice.sampler import make_rng


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--structure", choices=["bond", "site"], default="bond")
    ap.add_argument("--pmin", type=float, default=None)
    ap.add_argument("--pmax", type=float, default=None)
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    centre = 0.5 if args.structure == "bond" else 0.593
    lo = centre - 0.1 if args.pmin is None else args.pmin
    hi = centre + 0.1 if args.pmax is None else args.pmax
    ps = np.linspace(lo, hi, args.points)
    print("n,p,crossing")
    for n in args.n:
        freq = crossing_frequency(n, ps, args.samples, make_rng(args.seed, n), args.structure)
        for p, f in zip(ps, freq):
            print(f"{n},{p:.4f},{f:.4f}")


if __name__ == "__main__":
    main()
