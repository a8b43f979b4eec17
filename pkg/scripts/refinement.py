"""Comparison certificate on a run and on one grid + dt refinement of it."""
import argparse

from nematic.comparison import Trajectory, certificate
from nematic.dynamics import SimConfig, random_state


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, default=2)
    args = p.parse_args()
    n, dt = args.n, args.dt
    for _ in range(args.levels):
        cfg = SimConfig(n=n, dt=dt, T=args.T, N=args.N, seed=args.seed, record_every=max(1, round(0.05 / dt)))
        rep = certificate(Trajectory(cfg, random_state(cfg)), cfg, args.N)
        print(f"n={n:4d} dt={dt:.2e}  max defect {rep.max_defect:+.3e}  after t=0 {rep.defect[1:].max():+.3e}  "
              f"tolerance {rep.tolerance:.3e}  Hc bound {'ok' if rep.linf_bound_holds else 'violated'}")
        n, dt = 2 * n, dt / 2


if __name__ == "__main__":
    main()
