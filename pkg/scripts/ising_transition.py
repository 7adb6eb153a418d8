"""Plus-boundary Ising magnetisation across the transition with Swendsen-Wang.

Example:
    python3 scripts/ising_transition.py --side 64 --betas 0.3 0.4 0.44 0.5 0.6
"""
import argparse
import math

import numpy as np

from rclattice.lattice import build_box
from rclattice.sampler import integrated_autocorr, make_rng, sw_batch

BETA_C = 0.5 * math.log(1 + math.sqrt(2))


def magnetisation(side, beta, sweeps, burn_in, seed):
    g = build_box(2, side + 2)
    inside = np.zeros(g.n_vertices, bool)
    for v in range(g.n_vertices):
        i, j = g.coord(v)
        inside[v] = 0 < i <= side and 0 < j <= side
    eta = np.ones(g.n_vertices, int)
    region = np.flatnonzero(inside)
    mags = []

    def cb(s, sig, _open):
        if s >= burn_in:
            mags.append(sig[0, region].mean())

    sw_batch(g, np.array([-1, 1]), beta, inside, eta, eta[None, :].copy(), burn_in + sweeps,
             make_rng(seed, int(round(beta * 1e4))), callback=cb)
    m = np.array(mags)
    tau = integrated_autocorr(m)
    return m.mean(), math.sqrt(m.var(ddof=1) * 2 * tau / len(m)), tau


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.3, 0.4, 0.44, 0.5, 0.6])
    ap.add_argument("--sweeps", type=int, default=1000)
    ap.add_argument("--burn-in", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    print(f"# beta_c = {BETA_C:.6f}")
    print("beta,m,stderr,tau")
    for beta in args.betas:
        m, se, tau = magnetisation(args.side, beta, args.sweeps, args.burn_in, args.seed)
        print(f"{beta},{m:.5f},{se:.5f},{tau:.2f}")


if __name__ == "__main__":
    main()
