"""Command-line driver.

Subcommands::

    run         integrate a config, writing CSVs + checkpoints to a run dir
    resume      continue an interrupted run from its latest checkpoint
    analyze     decay / tau / powerlaw fits over a finished run directory
    tail        closed-form tail energies at chosen times -> CSV
    fixedpoint  radial fixed-point amplitude and residual
    oracle      solver vs direct power-series partial sums on a tiny grid

Exit codes: 0 success, 2 configuration, 3 numerics/estimation, 4 I/O and
malformed artifacts.  All CSV floats are written with ``repr`` (shortest
round-trip form), which makes identical runs byte-identical; the
``NSBLOWUP_WORKERS`` environment variable only parallelises transforms and
never changes results.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import estimate_critical_time, fit_decay_rate, fit_power_law
from .config import RunConfig, config_from_mapping, load_config
from .diagnostics import (
    MarginalProfile,
    TimeSeriesRecord,
    make_record,
    physical_marginal,
    spectral_marginal,
)
from .errors import CheckpointError, ConfigError, NumericError
from .grid import SpectralField, read_checkpoint, write_checkpoint
from .initcond import build_initial_field
from .solver import RunResult, StepReport, run
from .theory import (
    FixedPointParams,
    SeriesOracle,
    TailSeriesParams,
    fixed_point_residual,
    tail_energy_enstrophy,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

# spectral marginals emitted at every cadence tick: (quantity, axis index)
_TICK_MARGINALS = (("energy", 2), ("enstrophy", 2), ("enstrophy", 0))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _marginal_name(quantity: str, space: str, axis: int) -> str:
    return f"{quantity}_{space}_{axis + 1}.csv"


class CsvRunSink:
    """Writes the run directory: run.csv, marginal CSVs, checkpoints, manifest."""

    def __init__(self, out_dir: Path, cfg: RunConfig, resume_at: tuple[int, float] | None = None):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.started = _now()
        self._write_manifest(status="running")
        run_csv = self.dir / "run.csv"
        marg_paths = {
            (q, ax): self.dir / _marginal_name(q, "spectral", ax) for q, ax in _TICK_MARGINALS
        }
        if resume_at is None:
            run_csv.write_text(",".join(TimeSeriesRecord.CSV_FIELDS) + "\n")
            for p in marg_paths.values():
                p.write_text("t,axis_value,density\n")
        else:
            step, t = resume_at
            self._truncate(run_csv, lambda cells: int(cells[0]) <= step)
            for p in marg_paths.values():
                self._truncate(p, lambda cells: float(cells[0]) <= t)
        self._run_fh = open(run_csv, "a")
        self._marg_fh = {key: open(p, "a") for key, p in marg_paths.items()}

    @staticmethod
    def _truncate(path: Path, keep) -> None:
        if not path.exists():
            raise CheckpointError(f"cannot resume: {path} is missing")
        lines = path.read_text().splitlines()
        kept = [lines[0]] + [ln for ln in lines[1:] if ln and keep(ln.split(","))]
        path.write_text("\n".join(kept) + "\n")

    def on_tick(self, field: SpectralField, step: int, report: StepReport | None) -> None:
        rec = make_record(field, step)
        self._run_fh.write(",".join(_fmt(x) for x in rec.csv_row()) + "\n")
        self._run_fh.flush()
        for (q, ax), fh in self._marg_fh.items():
            prof = spectral_marginal(field, q, ax)
            t_str = _fmt(prof.t)
            for k, val in zip(prof.abscissa, prof.values):
                fh.write(f"{t_str},{_fmt(k)},{_fmt(val)}\n")
            fh.flush()

    def on_checkpoint(self, field: SpectralField, step: int) -> None:
        write_checkpoint(field, step, self.dir / f"checkpoint_{step:08d}.bin")

    def on_finish(self, result: RunResult) -> None:
        prof = physical_marginal(result.field, "energy", 2)
        with open(self.dir / _marginal_name("energy", "physical", 2), "w") as fh:
            fh.write("t,axis_value,density\n")
            t_str = _fmt(prof.t)
            for x, val in zip(prof.abscissa, prof.values):
                fh.write(f"{t_str},{_fmt(x)},{_fmt(val)}\n")
        self._run_fh.close()
        for fh in self._marg_fh.values():
            fh.close()
        self._write_manifest(status="done", result=result)

    def _write_manifest(self, status: str, result: RunResult | None = None) -> None:
        manifest = {
            "format": 1,
            "package": "nsblowup",
            "version": __version__,
            "status": status,
            "started": self.started,
            "config": self.cfg.raw,
        }
        if result is not None:
            manifest.update(
                finished=_now(),
                reason=result.reason,
                final_step=result.steps,
                final_t=result.field.t,
                checkpoints=sorted(p.name for p in self.dir.glob("checkpoint_*.bin")),
            )
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")


def _launch(cfg: RunConfig, out_dir: Path, resume_ckpt: Path | None) -> int:
    if resume_ckpt is None:
        v0 = build_initial_field(cfg.init, cfg.grid)
        start_step = 0
        sink = CsvRunSink(out_dir, cfg)
    else:
        field, start_step = read_checkpoint(resume_ckpt)
        if field.grid != cfg.grid:
            raise ConfigError(
                f"checkpoint grid {field.grid.bounds} does not match config grid"
            )
        v0 = field
        sink = CsvRunSink(out_dir, cfg, resume_at=(start_step, field.t))
    result = run(v0, cfg.solver, cfg.schedule, sink, start_step=start_step)
    print(
        f"run finished: reason={result.reason} step={result.steps} "
        f"t={_fmt(result.field.t)} dir={out_dir}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    return _launch(cfg, cfg.out_dir, Path(args.resume) if args.resume else None)


def cmd_resume(args) -> int:
    rundir = Path(args.run)
    manifest = json.loads((rundir / "manifest.json").read_text())
    cfg = config_from_mapping(manifest["config"])
    ckpts = sorted(rundir.glob("checkpoint_*.bin"))
    if not ckpts:
        raise CheckpointError(f"no checkpoints in {rundir}")
    return _launch(cfg, rundir, ckpts[-1])


# -- analyze --------------------------------------------------------------


def _read_marginals(path: Path) -> list[MarginalProfile]:
    quantity, space, axis1 = path.stem.split("_")
    lines = path.read_text().splitlines()[1:]
    profiles: list[MarginalProfile] = []
    cur_t: str | None = None
    xs: list[float] = []
    vs: list[float] = []

    def flush():
        if cur_t is not None:
            profiles.append(
                MarginalProfile(
                    quantity, space, int(axis1) - 1, np.array(xs), np.array(vs), float(cur_t)
                )
            )

    for ln in lines:
        t_str, x_str, v_str = ln.split(",")
        if t_str != cur_t:
            flush()
            cur_t, xs, vs = t_str, [], []
        xs.append(float(x_str))
        vs.append(float(v_str))
    flush()
    return profiles


def _read_run_csv(path: Path) -> dict[str, np.ndarray]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    cols = [[] for _ in header]
    for ln in lines[1:]:
        for c, cell in zip(cols, ln.split(",")):
            c.append(float(cell))
    return {name: np.asarray(col) for name, col in zip(header, cols)}


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _decay_fits(rundir: Path, k3_lo: float, last: int):
    profiles = _read_marginals(rundir / _marginal_name("energy", "spectral", 2))
    fits = []
    for prof in profiles:
        try:
            fits.append(fit_decay_rate(prof, k3_lo))
        except NumericError:
            continue
    fits = [f for f in fits if f.slope < 0.0]
    if not fits:
        raise NumericError("no usable decay fits in this run")
    return fits[-last:] if last else fits


def cmd_analyze(args) -> int:
    rundir = Path(args.run)
    manifest = json.loads((rundir / "manifest.json").read_text())
    a = float(manifest["config"]["init"]["a"])
    k3_lo = args.k3_lo if args.k3_lo is not None else 20.0 * a

    if args.what == "decay":
        fits = _decay_fits(rundir, k3_lo, args.last)
        _write_csv(
            rundir / "decay_fits.csv",
            ["t", "slope", "intercept", "stderr", "r_squared", "n_points"],
            [[f.t, f.slope, f.intercept, f.stderr, f.r_squared, f.n_points] for f in fits],
        )
        for f in fits:
            print(f"t={_fmt(f.t)} slope={f.slope:.6g} r2={f.r_squared:.6f} n={f.n_points}")
        return EXIT_OK

    if args.what == "tau":
        fits = _decay_fits(rundir, k3_lo, args.last)
        est = estimate_critical_time(fits)
        _write_csv(
            rundir / "tau_estimate.csv",
            ["tau_star", "stderr", "t_min", "t_max", "n_fits", "overestimate"],
            [[est.tau_star, est.stderr, est.t_min, est.t_max, est.n_fits, int(est.overestimate)]],
        )
        print(
            f"tau_star={_fmt(est.tau_star)} (stderr {est.stderr:.3g}, "
            f"overestimate, from {est.n_fits} fits)"
        )
        return EXIT_OK

    # powerlaw
    series = _read_run_csv(rundir / "run.csv")
    t = series["t"]
    v = series[args.quantity]
    if args.tau_star is not None:
        tau_star = args.tau_star
    else:
        tau_star = estimate_critical_time(_decay_fits(rundir, k3_lo, args.last)).tau_star
    keep = (t < tau_star) & (v > 0.0)
    t, v = t[keep], v[keep]
    t, v = t[-args.last :], v[-args.last :]
    window = tuple(args.window) if args.window else None
    fit = fit_power_law(t, v, tau_star, window)
    _write_csv(
        rundir / f"powerlaw_{args.quantity}.csv",
        ["quantity", "tau_star", "alpha", "stderr", "r_squared", "t_min", "t_max", "n_points"],
        [[args.quantity, tau_star, fit.alpha, fit.stderr, fit.r_squared, fit.t_min, fit.t_max, fit.n_points]],
    )
    print(f"alpha={fit.alpha:.6g} (stderr {fit.stderr:.3g}, r2={fit.r_squared:.6f})")
    return EXIT_OK


# -- theory subcommands ---------------------------------------------------


def _out_stream(spec: str):
    return sys.stdout if spec == "-" else open(spec, "w")


def cmd_tail(args) -> int:
    params = TailSeriesParams(
        a=args.a,
        kappa=args.kappa,
        tau=args.tau,
        p0=args.p0,
        sol_type=args.type,
        p_max=args.pmax,
        const=args.const,
    )
    if args.times:
        times = [float(x) for x in args.times.split(",")]
    else:
        deltas = np.logspace(np.log10(1.5e-3), np.log10(1.5e-2), 8)
        times = sorted(params.tau - d for d in deltas)
    out = _out_stream(args.out)
    try:
        out.write("t,energy,enstrophy\n")
        for t in times:
            e, s = tail_energy_enstrophy(t, params)
            out.write(f"{_fmt(t)},{_fmt(e)},{_fmt(s)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_fixedpoint(args) -> int:
    out = _out_stream(args.out)
    try:
        out.write("resolution,c_star,residual\n")
        for n in (args.resolution, 2 * args.resolution):
            res = fixed_point_residual(FixedPointParams(resolution=n, c=args.c))
            out.write(f"{n},{_fmt(res.c_star)},{_fmt(res.residual)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _parse_axis_bounds(text: str):
    axes = text.split(",")
    if len(axes) != 3:
        raise ConfigError(f"bounds need three comma-separated lo:hi ranges, got {text!r}")
    out = []
    for ax in axes:
        lo, _, hi = ax.partition(":")
        try:
            out.append((float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"bad bounds component {ax!r}") from exc
    return tuple(out)


def cmd_oracle(args) -> int:
    from .grid import make_grid
    from .initcond import InitialDataSpec
    from .solver import RunSchedule, SolverConfig

    grid = make_grid(_parse_axis_bounds(args.bounds), h=args.h)
    spec = InitialDataSpec(a=args.a, r=args.r, sign=args.sign, target_energy=args.target_energy)
    v0 = build_initial_field(spec, grid)
    cfg = SolverConfig(dt=args.dt, t_end=args.t, tol=args.tol)
    result = run(v0, cfg, RunSchedule(cadence=10**9))
    oracle = SeriesOracle(v0)
    out = _out_stream(args.out)
    try:
        out.write("order,max_rel_error\n")
        for p_top in (2, 3):
            ref = oracle.partial_sum(result.field.t, p_top)
            err = float(
                np.max(np.abs(result.field.data - ref.data)) / np.max(np.abs(ref.data))
            )
            out.write(f"{p_top},{_fmt(err)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsblowup",
        description=__doc__.split("\n\n")[0],
        epilog="Environment: NSBLOWUP_WORKERS sets the transform worker count "
        "(default 1); results are bitwise independent of it.",
    )
    parser.add_argument("--version", action="version", version=f"nsblowup {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configuration")
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from its latest checkpoint")
    p.add_argument("--run", required=True, help="existing run directory")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("analyze", help="fit estimators over a run directory")
    p.add_argument("what", choices=("decay", "tau", "powerlaw"))
    p.add_argument("--run", required=True)
    p.add_argument("--k3-lo", type=float, default=None, help="default 20*a from the manifest")
    p.add_argument("--last", type=int, default=8, help="use the last N usable ticks")
    p.add_argument("--tau-star", type=float, default=None)
    p.add_argument("--quantity", choices=("energy", "enstrophy"), default="enstrophy")
    p.add_argument("--window", type=lambda s: [float(x) for x in s.split(",")], default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tail", help="closed-form tail energies to CSV")
    p.add_argument("--type", choices=("I", "II"), required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--p0", type=int, default=10)
    p.add_argument("--pmax", type=int, default=2000)
    p.add_argument("--a", type=float, default=20.0)
    p.add_argument("--const", type=float, default=1.0)
    p.add_argument("--times", help="comma-separated times (default: a decade before tau)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("fixedpoint", help="radial fixed-point amplitude and residual")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fixedpoint)

    p = sub.add_parser("oracle", help="solver vs power-series partial sums (tiny grids)")
    p.add_argument("--bounds", default="-8:7,-8:7,-8:7")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--a", type=float, default=3.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--sign", type=int, default=1)
    p.add_argument("--target-energy", type=float, default=5.0)
    p.add_argument("--t", type=float, default=2e-3)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CheckpointError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
