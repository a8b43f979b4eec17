"""Command-line entry point.

Exit codes: 0 success, 1 verification failure or runtime error, 2 usage error.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import errors
from .errors import NematicError, ParseError, ValidationError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _report(exc):
    mod = type(exc).__module__
    print(f"{mod}.{type(exc).__name__}: {exc}", file=sys.stderr)


# --- subcommands -----------------------------------------------------------------------

def cmd_simulate(args):
    from .dynamics import initial_state, run
    from .io import EnergyCSV, RunManifest, parse_config, read_snapshot, snapshot_name, write_snapshot

    if not os.path.isfile(args.config):
        raise _UsageError(f"config file not found: {args.config}")
    cfg = parse_config(args.config)
    out = args.output_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    restart = args.restart is not None
    if restart:
        state = read_snapshot(args.restart, cfg)
    else:
        state = initial_state(cfg)
    manifest = RunManifest(os.path.join(out, "manifest.json"), cfg,
                           {"restart_from": os.path.abspath(args.restart) if restart else None})
    csv_out = EnergyCSV(os.path.join(out, "energy.csv"), append=restart)
    status = "error"
    try:
        if not restart:
            name = snapshot_name(0)
            write_snapshot(os.path.join(out, name), state)
            manifest.add_checkpoint(name, state.t, state.step)
        first = [True]

        def on_record(rec, st):
            # a restart repeats the checkpoint's own record; skip it
            if restart and first[0]:
                first[0] = False
                return
            first[0] = False
            csv_out.append(rec)

        def on_snapshot(st):
            name = snapshot_name(st.step)
            write_snapshot(os.path.join(out, name), st)
            manifest.add_checkpoint(name, st.t, st.step)

        final, records = run(cfg, state, on_record=on_record, on_snapshot=on_snapshot)
        name = "final.nmq"
        write_snapshot(os.path.join(out, name), final)
        manifest.add_checkpoint(name, final.t, final.step)
        status = "ok"
        last = records[-1]
        print(f"t={last.t:g} E={last.E:.10g} margin={last.margin:.4g} records={len(records)} -> {out}")
        return EXIT_OK
    finally:
        csv_out.close()
        manifest.finalize(status)


def _load_trajectory(path):
    from .comparison import Trajectory
    from .io import load_manifest, read_snapshot, snapshot_name

    run_dir = path if os.path.isdir(path) else os.path.dirname(path)
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise _UsageError(f"no manifest.json in {run_dir}")
    cfg, data = load_manifest(manifest_path)
    snap = os.path.join(run_dir, snapshot_name(0))
    if not os.path.isfile(snap):
        raise _UsageError(f"trajectory has no initial snapshot {snap}")
    return Trajectory(cfg, read_snapshot(snap, cfg))


def cmd_certify(args):
    from .comparison import certificate
    from .io import write_table_csv

    traj = _load_trajectory(args.trajectory)
    cfg = traj.config
    rep = certificate(traj, cfg, args.N, every=args.every)
    if args.out:
        write_table_csv(args.out, ["t", "defect", "psi_sup", "G_sup", "Hc_sup"], rep.rows())
    print(json.dumps({
        "max_defect": rep.max_defect,
        "tolerance": rep.tolerance,
        "certificate_holds": bool(rep.holds),
        "linf_bound_holds": rep.linf_bound_holds,
        "checkpoints": int(len(rep.t)),
    }))
    return EXIT_OK if rep.holds and rep.linf_bound_holds else EXIT_FAIL


def cmd_potential_table(args):
    from .io import write_table_csv
    from .potential import potential_table

    rows = potential_table(args.dim, args.resolution)
    header = [f"lambda_{i + 1}" for i in range(args.dim - 1)] + ["psi"] + \
        [f"mu_{i + 1}" for i in range(args.dim)] + ["logZ"]
    write_table_csv(args.out, header, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suite

    checks = run_suite(args.suite)
    for c in checks:
        print(json.dumps(c.as_dict()))
    failed = [c for c in checks if not c.passed]
    print(json.dumps({"suite": args.suite, "total": len(checks), "failed": len(failed)}))
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_taylor_green(args):
    from .verify import taylor_green_error

    meas, ana, err = taylor_green_error(nu=args.nu, T=args.T, n=args.n, dt=args.dt, Lambda=args.Lambda)
    print(f"measured |u(T)|/|u(0)| = {meas:.12f}")
    print(f"analytic exp(-2 nu k^2 T) = {ana:.12f}")
    print(f"relative error = {err:.3e}")
    return EXIT_OK if err <= 1e-6 else EXIT_FAIL


def cmd_homogeneous(args):
    from .dynamics import SimConfig
    from .tensor_algebra import Sym0Matrix
    from .verify import homogeneous_error, homogeneous_oracle

    cfg = SimConfig(Gamma=args.gamma, theta=args.theta, kappa=args.kappa, N=0, dim=3 if len(args.q0) == 5 else 2)
    Q0 = Sym0Matrix(cfg.dim, args.q0)
    ref = homogeneous_oracle(cfg, Q0, args.T)
    err = homogeneous_error(cfg, Q0, args.T, args.dt, ref)
    print(f"Q(T) oracle components = {np.array2string(ref.components, precision=12)}")
    print(f"max abs error = {err:.3e}")
    return EXIT_OK if err <= 1e-6 else EXIT_FAIL


def build_parser():
    p = _Parser(prog="nematic", description="Q-tensor nematic flow with a singular bulk potential")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a simulation from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--restart", help="resume from a snapshot file")
    s.add_argument("--output-dir", help="override output_dir from the config")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("certify", help="comparison certificate for a stored run")
    c.add_argument("--trajectory", required=True, help="run directory (manifest + initial snapshot)")
    c.add_argument("--N", type=int, default=16)
    c.add_argument("--out")
    c.add_argument("--every", type=int)
    c.set_defaults(func=cmd_certify)

    t = sub.add_parser("potential-table", help="tabulate psi over the physical triangle")
    t.add_argument("--dim", type=int, choices=(2, 3), required=True)
    t.add_argument("--resolution", type=int, required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_potential_table)

    v = sub.add_parser("verify", help="run property checks")
    v.add_argument("suite", choices=("potential", "spectral", "dynamics", "all"))
    v.set_defaults(func=cmd_verify)

    tg = sub.add_parser("taylor-green", help="Taylor-Green decay against the exact solution")
    tg.add_argument("--nu", type=float, default=0.1)
    tg.add_argument("--T", type=float, default=1.0)
    tg.add_argument("--n", type=int, default=64)
    tg.add_argument("--dt", type=float, default=1e-3)
    tg.add_argument("--Lambda", "--lambda", type=float, default=1.0)
    tg.set_defaults(func=cmd_taylor_green)

    h = sub.add_parser("homogeneous", help="spatially constant Q against an adaptive ODE solve")
    h.add_argument("--q0", type=float, nargs="+", default=[0.2, 0.05])
    h.add_argument("--T", type=float, default=1.0)
    h.add_argument("--dt", type=float, default=1e-3)
    h.add_argument("--gamma", type=float, default=1.0)
    h.add_argument("--theta", type=float, default=1.0)
    h.add_argument("--kappa", type=float, default=1.0)
    h.set_defaults(func=cmd_homogeneous)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.command == "homogeneous" and len(args.q0) not in (2, 5):
            raise _UsageError("--q0 takes 2 (d=2) or 5 (d=3) components")
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, errors.GridMismatch, errors.ConfigMismatch) as exc:
        _report(exc)
        return EXIT_USAGE
    except (NematicError, OSError) as exc:
        _report(exc)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
