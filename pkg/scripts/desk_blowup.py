#!/usr/bin/env python3
"""Drive a desk-scale blow-up run end to end and summarize the estimators.

Runs the solver on a preset (type II by default), then chains the decay,
critical-time and power-law analyses on the output directory the way we
do it by hand, and prints one compact report.  Everything goes through
the command-line surface so this doubles as a smoke test of it.
"""

import argparse
import csv
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from nsblowup.cli import main as cli

PRESETS = Path(__file__).resolve().parents[1] / "presets"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(PRESETS / "desk_type2.toml"))
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("--k3-lo", type=float, default=None)
    ap.add_argument("--last", type=int, default=8, help="fits fed to the tau estimator")
    args = ap.parse_args()

    config = Path(args.config)
    with open(config, "rb") as fh:
        rundir = Path(tomllib.load(fh)["output"]["directory"])
    if args.out:
        # run subcommand takes the directory from the config, so patch a copy
        rundir = Path(args.out)
        rundir.mkdir(parents=True, exist_ok=True)
        patched = rundir / "config.toml"
        lines = []
        for ln in config.read_text().splitlines():
            if ln.startswith("directory"):
                ln = f'directory = "{rundir}"'
            lines.append(ln)
        patched.write_text("\n".join(lines) + "\n")
        config = patched

    rc = cli(["run", "--config", str(config)])
    if rc != 0:
        sys.exit(rc)

    extra = [] if args.k3_lo is None else ["--k3-lo", str(args.k3_lo)]
    # estimators can legitimately decline (e.g. no decay window on a tiny
    # mesh); report what exists rather than failing the whole drive
    cli(["analyze", "decay", "--run", str(rundir)] + extra)
    cli(["analyze", "tau", "--run", str(rundir), "--last", str(args.last)] + extra)
    cli(["analyze", "powerlaw", "--run", str(rundir), "--quantity", "enstrophy",
         "--last", str(args.last)] + extra)

    series = read_rows(rundir / "run.csv")
    first, last = series[0], series[-1]
    print()
    print(f"run: {rundir}  ({len(series)} ticks, final step {last['step']})")
    print(f"  enstrophy growth {float(last['enstrophy']) / float(first['enstrophy']):.3e}, "
          f"energy growth {float(last['energy']) / float(first['energy']):.3e}")
    if (rundir / "decay_fits.csv").exists():
        for row in read_rows(rundir / "decay_fits.csv")[-3:]:
            print(f"  decay fit t={float(row['t']):.4g}  slope={float(row['slope']):+.4f}  "
                  f"r2={float(row['r_squared']):.4f}")
    if (rundir / "tau_estimate.csv").exists():
        tau = read_rows(rundir / "tau_estimate.csv")[0]
        print(f"  tau_star = {float(tau['tau_star']):.6g}  (stderr {float(tau['stderr']):.2g}, "
              f"{tau['n_fits']} fits)")
    if (rundir / "powerlaw_enstrophy.csv").exists():
        pl = read_rows(rundir / "powerlaw_enstrophy.csv")[0]
        print(f"  enstrophy power law alpha = {float(pl['alpha']):.4f}  "
              f"(r2 {float(pl['r_squared']):.4f})")


if __name__ == "__main__":
    main()
