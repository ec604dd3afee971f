"""Config parsing, the command surface, and run-directory round trips."""

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from nsblowup.cli import _fmt, _marginal_name, _parse_axis_bounds, main
from nsblowup.config import config_from_mapping, parse_config
from nsblowup.errors import ConfigError
from nsblowup.grid import read_checkpoint
from nsblowup.theory import (
    FixedPointParams,
    TailSeriesParams,
    fixed_point_residual,
    tail_energy_enstrophy,
)

CONFIG_TEMPLATE = """\
[grid]
k1 = [-4.0, 4.0]
k2 = [-4.0, 4.0]
k3 = [-4.0, 12.0]

[init]
a = 3.0
r = 2.0
sign = -1
target_energy = 10.0

[solver]
dt = 1e-3
t_end = {t_end}
tol = 1e-10

[output]
directory = "{out_dir}"
cadence = 5
checkpoint_every = 10
"""


def write_config(path: Path, out_dir: Path, t_end: float = 2e-2) -> Path:
    path.write_text(CONFIG_TEMPLATE.format(t_end=t_end, out_dir=out_dir))
    return path


MARGINAL_FILES = (
    "energy_spectral_3.csv",
    "enstrophy_spectral_3.csv",
    "enstrophy_spectral_1.csv",
)


class TestConfigParsing:
    def test_round_trip(self, tmp_path):
        cfg = parse_config(CONFIG_TEMPLATE.format(t_end=2e-2, out_dir=tmp_path / "o"))
        assert cfg.grid.bounds == ((-4.0, 4.0), (-4.0, 4.0), (-4.0, 12.0))
        assert cfg.init.a == 3.0 and cfg.init.sign == -1
        assert cfg.solver.dt == 1e-3 and cfg.solver.tol == 1e-10
        assert cfg.schedule.cadence == 5 and cfg.schedule.checkpoint_every == 10
        assert cfg.out_dir == tmp_path / "o"
        assert cfg.raw["init"]["target_energy"] == 10.0

    def test_empty_config_lists_every_required_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config("")
        msg = str(err.value)
        for key in (
            "grid.k1",
            "grid.k2",
            "grid.k3",
            "init.a",
            "init.r",
            "init.sign",
            "init.target_energy",
            "solver.dt",
            "solver.t_end",
            "output.directory",
        ):
            assert f"missing required key {key}" in msg

    def test_unknown_names_rejected_together(self, tmp_path):
        text = CONFIG_TEMPLATE.format(t_end=1e-2, out_dir=tmp_path) + (
            "\n[extra]\nx = 1\n"
        )
        text = text.replace("tol = 1e-10", "tol = 1e-10\ntypo_key = 3")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msg = str(err.value)
        assert "unknown section [extra]" in msg
        assert "unknown key solver.typo_key" in msg

    def test_type_violations_reported(self, tmp_path):
        text = CONFIG_TEMPLATE.format(t_end=1e-2, out_dir=tmp_path)
        text = text.replace("sign = -1", 'sign = "minus"')
        text = text.replace("k1 = [-4.0, 4.0]", "k1 = [-4.0]")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msg = str(err.value)
        assert "init.sign must be a integer" in msg
        assert "grid.k1 must be a bounds" in msg

    def test_invalid_toml(self):
        with pytest.raises(ConfigError, match="not valid TOML"):
            parse_config("[grid\nk1 = nope")

    def test_domain_violations_collected(self, tmp_path):
        text = CONFIG_TEMPLATE.format(t_end=1e-2, out_dir=tmp_path)
        text = text.replace("dt = 1e-3", "dt = -1e-3")
        text = text.replace("r = 2.0", "r = 5.0")  # support wider than centre offset
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msg = str(err.value)
        assert "dt must be positive" in msg
        assert "0 < r < a" in msg


class TestSmallHelpers:
    def test_fmt_round_trips(self):
        assert _fmt(3) == "3"
        assert _fmt(np.int64(-7)) == "-7"
        assert _fmt(0.1) == "0.1"
        assert _fmt(2.0) == "2.0"
        third = 1.0 / 3.0
        assert float(_fmt(third)) == third
        assert _fmt("enstrophy") == "enstrophy"

    def test_marginal_name_is_one_based(self):
        assert _marginal_name("energy", "spectral", 2) == "energy_spectral_3.csv"
        assert _marginal_name("enstrophy", "physical", 0) == "enstrophy_physical_1.csv"

    def test_parse_axis_bounds(self):
        assert _parse_axis_bounds("-8:7,-8:7,0:15") == ((-8.0, 7.0), (-8.0, 7.0), (0.0, 15.0))
        with pytest.raises(ConfigError):
            _parse_axis_bounds("-8:7,-8:7")
        with pytest.raises(ConfigError):
            _parse_axis_bounds("-8:7,-8:7,a:b")


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    """A completed small run plus the config file that produced it."""
    root = tmp_path_factory.mktemp("cli_run")
    out = root / "rundir"
    cfg = write_config(root / "cfg.toml", out)
    assert main(["run", "--config", str(cfg)]) == 0
    return cfg, out


class TestRunDirectory:
    def test_artifacts_present(self, finished_run):
        _, out = finished_run
        for name in ("run.csv", "manifest.json", "energy_physical_3.csv") + MARGINAL_FILES:
            assert (out / name).exists(), name
        assert sorted(p.name for p in out.glob("checkpoint_*.bin")) == [
            "checkpoint_00000000.bin",
            "checkpoint_00000010.bin",
            "checkpoint_00000020.bin",
        ]

    def test_run_csv_ticks(self, finished_run):
        _, out = finished_run
        lines = (out / "run.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == "step" and "enstrophy" in header
        steps = [int(ln.split(",")[0]) for ln in lines[1:]]
        assert steps == [0, 5, 10, 15, 20]

    def test_marginals_grouped_by_tick(self, finished_run):
        _, out = finished_run
        lines = (out / "energy_spectral_3.csv").read_text().splitlines()
        assert lines[0] == "t,axis_value,density"
        times = {ln.split(",")[0] for ln in lines[1:]}
        assert len(times) == 5
        # 17 nodes on the long axis per tick
        assert len(lines) - 1 == 5 * 17

    def test_manifest_relaunches_the_run(self, finished_run):
        cfg_path, out = finished_run
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "done"
        assert manifest["reason"] == "t_end"
        assert manifest["final_step"] == 20
        assert manifest["config"] == tomllib.loads(cfg_path.read_text())
        rebuilt = config_from_mapping(manifest["config"])
        assert rebuilt.grid.bounds == ((-4.0, 4.0), (-4.0, 4.0), (-4.0, 12.0))
        assert rebuilt.solver.dt == 1e-3

    def test_checkpoint_contents(self, finished_run):
        _, out = finished_run
        field, step = read_checkpoint(out / "checkpoint_00000020.bin")
        assert step == 20
        assert field.grid.bounds == ((-4.0, 4.0), (-4.0, 4.0), (-4.0, 12.0))
        run_rows = (out / "run.csv").read_text().splitlines()[1:]
        final_t = float(run_rows[-1].split(",")[1])
        assert field.t == final_t

    def test_identical_config_is_byte_identical(self, finished_run, tmp_path):
        _, out = finished_run
        out2 = tmp_path / "again"
        cfg2 = write_config(tmp_path / "cfg.toml", out2)
        assert main(["run", "--config", str(cfg2)]) == 0
        for name in ("run.csv", "energy_physical_3.csv") + MARGINAL_FILES:
            assert (out2 / name).read_bytes() == (out / name).read_bytes(), name


class TestResume:
    def test_resume_reproduces_straight_run(self, finished_run, tmp_path):
        _, straight = finished_run
        out = tmp_path / "interrupted"
        cfg = write_config(tmp_path / "cfg.toml", out)
        assert main(["run", "--config", str(cfg)]) == 0
        # drop the final checkpoint so the latest surviving one is mid-run,
        # as after a crash; stale tail rows are the resumer's problem
        (out / "checkpoint_00000020.bin").unlink()
        assert main(["resume", "--run", str(out)]) == 0
        for name in ("run.csv", "energy_physical_3.csv") + MARGINAL_FILES:
            assert (out / name).read_bytes() == (straight / name).read_bytes(), name
        assert (out / "checkpoint_00000020.bin").read_bytes() == (
            straight / "checkpoint_00000020.bin"
        ).read_bytes()

    def test_resume_rejects_mismatched_grid(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "cfg.toml", out)
        assert main(["run", "--config", str(cfg)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        manifest["config"]["grid"]["k3"] = [-4.0, 14.0]
        (out / "manifest.json").write_text(json.dumps(manifest))
        assert main(["resume", "--run", str(out)]) == 2

    def test_resume_without_checkpoints(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "cfg.toml", out)
        assert main(["run", "--config", str(cfg)]) == 0
        for ckpt in out.glob("checkpoint_*.bin"):
            ckpt.unlink()
        assert main(["resume", "--run", str(out)]) == 4


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 4

    def test_malformed_config(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[grid\n")
        assert main(["run", "--config", str(bad)]) == 2

    def test_analysis_without_usable_fits(self, finished_run):
        # default window starts at 20 a = 60, beyond this little mesh
        _, out = finished_run
        assert main(["analyze", "decay", "--run", str(out)]) == 3

    def test_bad_oracle_bounds(self):
        assert main(["oracle", "--bounds", "1:2"]) == 2

    def test_help_exits_zero(self):
        proc = subprocess.run(
            [sys.executable, "-m", "nsblowup", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        for sub in ("run", "resume", "analyze", "tail", "fixedpoint", "oracle"):
            assert sub in proc.stdout


def synthetic_run_dir(root: Path, tau: float = 7e-4, alpha: float = 1.25) -> Path:
    """Fabricate a run directory with exactly known decay lines and power laws.

    Spectral profiles carry local maxima on exact log-lines whose slopes
    close linearly at ``tau``; the scalar series follows (tau - t)^-alpha.
    """
    out = root / "synthetic"
    out.mkdir()
    config = tomllib.loads(
        CONFIG_TEMPLATE.format(t_end=1e-3, out_dir=out).replace("a = 3.0", "a = 5.0")
    )
    (out / "manifest.json").write_text(json.dumps({"config": config}))

    times = [tau - 6e-4 + 5e-5 * i for i in range(10)]
    ks = np.arange(0, 201)
    with open(out / "energy_spectral_3.csv", "w") as fh:
        fh.write("t,axis_value,density\n")
        for t in times:
            slope = 80.0 * (t - tau)  # closes to zero exactly at tau
            vals = np.where(ks % 5 == 0, np.exp(slope * ks - 0.3), 1e-300)
            for k, v in zip(ks, vals):
                fh.write(f"{t!r},{float(k)!r},{float(v)!r}\n")

    fields = (
        "step,t,t_mag,energy,enstrophy,quad_energy,quad_enstrophy,"
        "divergence,max_s3_location,edge_fraction"
    )
    with open(out / "run.csv", "w") as fh:
        fh.write(fields + "\n")
        for i, t in enumerate(times):
            ens = 2.0 * (tau - t) ** -alpha
            ene = 0.5 * (tau - t) ** (-alpha / 2)
            fh.write(f"{i},{t!r},{t * 1e7!r},{ene!r},{ens!r},0.0,0.0,0.0,5.0,0.0\n")
    return out


@pytest.fixture(scope="module")
def rundir(tmp_path_factory):
    return synthetic_run_dir(tmp_path_factory.mktemp("analyze"))


class TestAnalyze:
    def test_decay_fits(self, rundir):
        assert main(["analyze", "decay", "--run", str(rundir)]) == 0
        lines = (rundir / "decay_fits.csv").read_text().splitlines()
        assert lines[0].split(",")[:3] == ["t", "slope", "intercept"]
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 8  # default --last
        for row in rows:
            t, slope = float(row[0]), float(row[1])
            np.testing.assert_allclose(slope, 80.0 * (t - 7e-4), rtol=1e-9)
            np.testing.assert_allclose(float(row[4]), 1.0)  # r_squared

    def test_tau_estimate(self, rundir):
        assert main(["analyze", "tau", "--run", str(rundir)]) == 0
        header, row = (rundir / "tau_estimate.csv").read_text().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        np.testing.assert_allclose(float(cells["tau_star"]), 7e-4, rtol=1e-9)
        assert cells["overestimate"] == "1"
        assert int(cells["n_fits"]) == 8

    def test_powerlaw_recovery(self, rundir):
        assert main(["analyze", "powerlaw", "--run", str(rundir)]) == 0
        header, row = (rundir / "powerlaw_enstrophy.csv").read_text().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        np.testing.assert_allclose(float(cells["alpha"]), 1.25, rtol=1e-6)
        assert cells["quantity"] == "enstrophy"

    def test_powerlaw_energy_with_explicit_tau(self, rundir):
        rc = main(
            [
                "analyze",
                "powerlaw",
                "--run",
                str(rundir),
                "--quantity",
                "energy",
                "--tau-star",
                repr(7e-4),
            ]
        )
        assert rc == 0
        header, row = (rundir / "powerlaw_energy.csv").read_text().splitlines()
        cells = dict(zip(header.split(","), row.split(",")))
        np.testing.assert_allclose(float(cells["alpha"]), 0.625, rtol=1e-9)

    def test_k3_window_override_narrows_fit(self, rundir):
        assert main(["analyze", "decay", "--run", str(rundir), "--k3-lo", "150"]) == 0
        rows = (rundir / "decay_fits.csv").read_text().splitlines()[1:]
        assert all(int(float(r.split(",")[5])) < 20 for r in rows)  # n_points shrank


class TestTheoryCommands:
    def test_tail_matches_library_call(self, tmp_path):
        out = tmp_path / "tail.csv"
        rc = main(
            [
                "tail",
                "--type",
                "II",
                "--a",
                "4.0",
                "--p0",
                "2",
                "--pmax",
                "10",
                "--times",
                "0.7,0.8",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,energy,enstrophy"
        params = TailSeriesParams(a=4.0, p0=2, p_max=10, sol_type="II")
        for ln, t in zip(lines[1:], (0.7, 0.8)):
            cells = [float(x) for x in ln.split(",")]
            e, s = tail_energy_enstrophy(t, params)
            np.testing.assert_allclose(cells, [t, e, s], rtol=1e-13)

    def test_tail_writes_stdout_by_default(self, capsys):
        rc = main(
            ["tail", "--type", "I", "--a", "4.0", "--p0", "2", "--pmax", "6", "--times", "0.9"]
        )
        assert rc == 0
        got = capsys.readouterr().out.splitlines()
        assert got[0] == "t,energy,enstrophy"
        assert len(got) == 2

    def test_fixedpoint_doubles_resolution(self, tmp_path):
        out = tmp_path / "fp.csv"
        assert main(["fixedpoint", "--resolution", "8", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "resolution,c_star,residual"
        for ln, n in zip(lines[1:], (8, 16)):
            cells = ln.split(",")
            res = fixed_point_residual(FixedPointParams(resolution=n))
            assert int(cells[0]) == n
            np.testing.assert_allclose(float(cells[1]), res.c_star, rtol=1e-13)
            np.testing.assert_allclose(float(cells[2]), res.residual, rtol=1e-13)

    def test_oracle_orders(self, tmp_path):
        out = tmp_path / "oracle.csv"
        rc = main(
            [
                "oracle",
                "--bounds=-6:6,-6:6,-6:6",
                "--t",
                "1e-3",
                "--dt",
                "1e-4",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "order,max_rel_error"
        errs = {int(ln.split(",")[0]): float(ln.split(",")[1]) for ln in lines[1:]}
        assert set(errs) == {2, 3}
        # the three-term sum tracks the stepped solution far better than two
        assert errs[3] < 1e-6
        assert errs[3] < errs[2]
