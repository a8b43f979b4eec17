"""Track the eigenvalue margin of a run started close to the physical boundary."""
import argparse

from nematic.diagnostics import strict_physicality_report
from nematic.dynamics import SimConfig, random_state, run


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--margin", type=float, default=1e-3)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    cfg = SimConfig(n=args.n, dt=args.dt, T=args.T, N=args.N, q_margin=args.margin, seed=args.seed,
                    record_every=20)
    _, records = run(cfg, random_state(cfg))
    rep = strict_physicality_report(records, T=cfg.T)
    for t, m, s in zip(rep.t, rep.margin, rep.psi_sup):
        print(f"t={t:6.3f}  margin={m:.4e}  sup psi_N={s:+.4f}")
    print(f"margin >= {rep.delta_floor:g} after t={rep.t_burn:g}: {rep.holds}")


if __name__ == "__main__":
    main()
