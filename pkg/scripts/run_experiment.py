"""Run one simulation from keyword overrides and print the energy history.

    python3 scripts/run_experiment.py n=64 dt=5e-4 T=1 xi=0.3 --csv out.csv
"""
import argparse

from nematic.diagnostics import CSV_COLUMNS, energy_increases
from nematic.dynamics import SimConfig, initial_state, run
from nematic.io import CONFIG_KEYS, parse_config_text, write_table_csv


def config_from_pairs(pairs):
    base = SimConfig()
    known = {name: key for key, (name, _) in CONFIG_KEYS.items()}
    values = {known[name]: getattr(base, name) for name in known}
    for pair in pairs:
        key, _, val = pair.partition("=")
        values[key] = val
    return parse_config_text("\n".join(f"{k} = {v}" for k, v in values.items()))


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("overrides", nargs="*", help="config key=value pairs")
    p.add_argument("--csv", help="write the energy records here")
    args = p.parse_args()
    cfg = config_from_pairs(args.overrides)
    _, records = run(cfg, initial_state(cfg))
    for r in records:
        print(f"t={r.t:8.4f}  E={r.E:+.10e}  F={r.F:.4e}  margin={r.margin:.4e}  residual={r.residual:.2e}")
    print(f"energy increases: {len(energy_increases(records))}")
    if args.csv:
        write_table_csv(args.csv, CSV_COLUMNS, [r.row() for r in records])


if __name__ == "__main__":
    main()
