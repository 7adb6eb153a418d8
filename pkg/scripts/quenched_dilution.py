"""Quenched diluted Potts model compared with the Bernoulli sandwich p_under <= p_bar.

Example:
    python3 scripts/quenched_dilution.py --side 64 --p 0.9 --q 2 --betas 0.5 1.0 2.0
"""
import argparse

from rclattice.disorder import DisorderLaw, bernoulli_observable, dilution_beta_bounds, quenched_experiment
from rclattice.lattice import build_box
from rclattice.sampler import make_rng


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--p", type=float, default=0.9)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--replicas", type=int, default=16)
    ap.add_argument("--sweeps", type=int, default=60)
    ap.add_argument("--burn-in", type=int, default=20)
    ap.add_argument("--bernoulli-samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    g = build_box(2, args.side, "periodic")
    law = DisorderLaw("dilution", p=args.p)
    lo, hi = dilution_beta_bounds(args.p, args.q, 0.5)
    print(f"# 2 beta_c in [{lo:.4f}, {hi:.4f}] for bond dilution on Z^2")
    print("beta,p_under,lower,lower_se,quenched,quenched_se,p_bar,upper,upper_se")
    for i, beta in enumerate(args.betas):
        pu, pb = law.punder(beta, args.q), law.pbar(beta)
        s = quenched_experiment(g, law, beta, args.q, args.replicas, args.sweeps,
                                make_rng(args.seed, i, 0), burn_in=args.burn_in, observable="largest")
        a, a_se = bernoulli_observable(g, pu, args.bernoulli_samples, make_rng(args.seed, i, 1), "largest")
        b, b_se = bernoulli_observable(g, pb, args.bernoulli_samples, make_rng(args.seed, i, 2), "largest")
        print(f"{beta},{pu:.4f},{a:.4f},{a_se:.4f},{s.mean:.4f},{s.stderr:.4f},{pb:.4f},{b:.4f},{b_se:.4f}")


if __name__ == "__main__":
    main()
