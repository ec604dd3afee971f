"""Run configuration: TOML with explicit sections, validated exhaustively.

A config names a grid, the initial bump, the stepping parameters, and the
output layout::

    [grid]
    k1 = [-31.0, 31.0]
    k2 = [-31.0, 31.0]
    k3 = [-15.0, 511.0]
    h = 1.0                 # optional, default 1.0

    [init]
    a = 5.0
    r = 4.0
    sign = 1                # -1 -> type I, +1 -> type II
    target_energy = 49500.0

    [solver]
    dt = 1e-6
    t_end = 5e-4
    tol = 1e-8              # optional
    max_corrector_iters = 50  # optional
    nonlinear = true        # optional

    [output]
    directory = "runs/desk"
    cadence = 10            # optional, steps between CSV rows
    checkpoint_every = 100  # optional, 0 disables

Unknown keys are rejected (anti-typo) and every violation is reported in a
single pass, not just the first.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .errors import ConfigError
from .grid import GridSpec, make_grid
from .initcond import InitialDataSpec
from .solver import RunSchedule, SolverConfig

__all__ = ["RunConfig", "parse_config", "load_config", "config_from_mapping"]

_BOUNDS = "bounds"
_NUM = "number"
_INT = "integer"
_BOOL = "boolean"
_STR = "string"

# section -> key -> (kind, required)
_SCHEMA = {
    "grid": {
        "k1": (_BOUNDS, True),
        "k2": (_BOUNDS, True),
        "k3": (_BOUNDS, True),
        "h": (_NUM, False),
    },
    "init": {
        "a": (_NUM, True),
        "r": (_NUM, True),
        "sign": (_INT, True),
        "target_energy": (_NUM, True),
    },
    "solver": {
        "dt": (_NUM, True),
        "t_end": (_NUM, True),
        "tol": (_NUM, False),
        "max_corrector_iters": (_INT, False),
        "nonlinear": (_BOOL, False),
    },
    "output": {
        "directory": (_STR, True),
        "cadence": (_INT, False),
        "checkpoint_every": (_INT, False),
    },
}


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    init: InitialDataSpec
    solver: SolverConfig
    schedule: RunSchedule
    out_dir: Path
    raw: dict  # parsed TOML, echoed into the run manifest


def _check_kind(value, kind) -> bool:
    if kind == _BOUNDS:
        return (
            isinstance(value, list)
            and len(value) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
        )
    if kind == _NUM:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == _INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == _BOOL:
        return isinstance(value, bool)
    return isinstance(value, str)


def config_from_mapping(data: dict) -> RunConfig:
    """Validate a parsed mapping and build the typed config.

    Collects every schema violation before raising, so a bad file is fixed
    in one round trip.
    """
    problems: list[str] = []
    for name, value in data.items():
        if name not in _SCHEMA:
            problems.append(f"unknown section [{name}]")
        elif not isinstance(value, dict):
            problems.append(f"[{name}] must be a section, not a value")
    for sec_name, schema in _SCHEMA.items():
        section = data.get(sec_name)
        if not isinstance(section, dict):
            for key, (_, required) in schema.items():
                if required:
                    problems.append(f"missing required key {sec_name}.{key}")
            continue
        for key in section:
            if key not in schema:
                problems.append(f"unknown key {sec_name}.{key}")
        for key, (kind, required) in schema.items():
            if key not in section:
                if required:
                    problems.append(f"missing required key {sec_name}.{key}")
            elif not _check_kind(section[key], kind):
                problems.append(f"{sec_name}.{key} must be a {kind}")

    if problems:
        raise ConfigError(
            "invalid configuration:\n  - " + "\n  - ".join(problems)
        )

    grid_sec = data["grid"]
    init_sec = data["init"]
    solver_sec = data["solver"]
    out_sec = data["output"]
    pieces = []
    try:
        pieces.append(
            make_grid(
                (tuple(grid_sec["k1"]), tuple(grid_sec["k2"]), tuple(grid_sec["k3"])),
                h=float(grid_sec.get("h", 1.0)),
            )
        )
    except ConfigError as exc:
        problems.append(str(exc))
    try:
        pieces.append(
            InitialDataSpec(
                a=float(init_sec["a"]),
                r=float(init_sec["r"]),
                sign=int(init_sec["sign"]),
                target_energy=float(init_sec["target_energy"]),
            )
        )
    except ConfigError as exc:
        problems.append(str(exc))
    try:
        pieces.append(
            SolverConfig(
                dt=float(solver_sec["dt"]),
                t_end=float(solver_sec["t_end"]),
                tol=float(solver_sec.get("tol", 1e-8)),
                max_corrector_iters=int(solver_sec.get("max_corrector_iters", 50)),
                nonlinear_enabled=bool(solver_sec.get("nonlinear", True)),
            )
        )
    except ConfigError as exc:
        problems.append(str(exc))
    try:
        pieces.append(
            RunSchedule(
                cadence=int(out_sec.get("cadence", 1)),
                checkpoint_every=int(out_sec.get("checkpoint_every", 0)),
            )
        )
    except ConfigError as exc:
        problems.append(str(exc))

    if problems:
        raise ConfigError(
            "invalid configuration:\n  - " + "\n  - ".join(problems)
        )
    grid, init, solver, schedule = pieces
    return RunConfig(grid, init, solver, schedule, Path(out_sec["directory"]), data)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return config_from_mapping(data)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
