from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .cell import DiskInclusion, StraightLayers, UnitCell
from .elliptic import RectDomain
from .errors import ConfigError
from .loads import LoadSpec, parse_load
from .tensors import IsotropicPhase, project_gutierrez

COMMANDS = ("ellipticity", "homogenize", "theta-sweep", "dispersion", "solve", "converge", "wave")
BC_MODES = ("auto", "dirichlet", "mixed")
CELL_KINDS = ("layers", "disk")


@dataclass(frozen=True)
class PhaseConfig:
    lam: float
    mu: float
    rho: float


@dataclass(frozen=True)
class CellConfig:
    kind: str
    theta: float
    normal: int
    center: list[float]
    radius: float


@dataclass(frozen=True)
class GridConfig:
    cell_n: int
    domain: list[float]
    m: int


@dataclass(frozen=True)
class LoadConfig:
    f: list[str]
    a: list[float]
    b: list[float]
    alpha: float


@dataclass(frozen=True)
class SolverConfig:
    rtol: float
    workers: int
    lambda_per: bool


@dataclass(frozen=True)
class WaveConfig:
    ms: list[int]
    snapshots: bool


@dataclass(frozen=True)
class RunConfig:
    command: str
    phase1: PhaseConfig
    phase2: PhaseConfig
    project: bool
    cell: CellConfig
    grid: GridConfig
    eps: list[float]
    thetas: list[float]
    k_grid: int
    load: LoadConfig
    bc: str
    solver: SolverConfig
    wave: WaveConfig
    output_dir: str


DEFAULT_PHASE1 = PhaseConfig(lam=1.0, mu=1.0, rho=1.0)
DEFAULT_PHASE2 = PhaseConfig(lam=-3.0, mu=2.0, rho=1.0)
DEFAULT_CELL = CellConfig(kind="layers", theta=0.5, normal=1, center=[0.5, 0.5], radius=0.3)
DEFAULT_GRID = GridConfig(cell_n=64, domain=[1.0, 1.0], m=128)
DEFAULT_LOAD = LoadConfig(f=["sin(pi,pi)", "sin(pi,pi)"], a=[1.0, 1.0], b=[1.0, 1.0], alpha=1.0)
DEFAULT_SOLVER = SolverConfig(rtol=1e-10, workers=1, lambda_per=False)
DEFAULT_WAVE = WaveConfig(ms=[32, 64, 128], snapshots=False)

DEFAULT_CONFIG = RunConfig(
    command="homogenize",
    phase1=DEFAULT_PHASE1,
    phase2=DEFAULT_PHASE2,
    project=False,
    cell=DEFAULT_CELL,
    grid=DEFAULT_GRID,
    eps=[0.25, 0.125, 0.0625],
    thetas=[0.3, 0.4, 0.5],
    k_grid=360,
    load=DEFAULT_LOAD,
    bc="auto",
    solver=DEFAULT_SOLVER,
    wave=DEFAULT_WAVE,
    output_dir="aether-lab-out",
)


def _get(data: dict[str, Any], key: str, default: Any) -> Any:
    value = data.get(key, default)
    return default if value is None else value


def _section(data: Any, field: str, allowed: tuple[str, ...]) -> dict[str, Any]:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(field, "expected an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        prefix = f"{field}." if field else ""
        raise ConfigError(prefix + unknown[0], "unknown key")
    return data


def _float(data: dict[str, Any], key: str, default: float, field: str) -> float:
    value = _get(data, key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    return float(value)


def _int(data: dict[str, Any], key: str, default: int, field: str) -> int:
    value = _get(data, key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _bool(data: dict[str, Any], key: str, default: bool, field: str) -> bool:
    value = _get(data, key, default)
    if not isinstance(value, bool):
        raise ConfigError(field, f"expected true or false, got {value!r}")
    return value


def _choice(
    data: dict[str, Any], key: str, default: str, field: str, choices: tuple[str, ...]
) -> str:
    value = _get(data, key, default)
    if value not in choices:
        raise ConfigError(field, f"expected one of {', '.join(choices)}, got {value!r}")
    return str(value)


def _floats(
    data: dict[str, Any], key: str, default: list[float], field: str, *, size: int | None = None
) -> list[float]:
    value = _get(data, key, default)
    if not isinstance(value, list):
        raise ConfigError(field, "expected a list of numbers")
    items = [_float({"v": item}, "v", 0.0, f"{field}[{index}]") for index, item in enumerate(value)]
    if size is not None and len(items) != size:
        raise ConfigError(field, f"expected {size} values, got {len(items)}")
    return items


def _phase_from_dict(data: Any, field: str, default: PhaseConfig) -> PhaseConfig:
    section = _section(data, field, ("lambda", "mu", "rho"))
    return PhaseConfig(
        lam=_float(section, "lambda", default.lam, f"{field}.lambda"),
        mu=_float(section, "mu", default.mu, f"{field}.mu"),
        rho=_float(section, "rho", default.rho, f"{field}.rho"),
    )


def _cell_from_dict(data: Any) -> CellConfig:
    section = _section(data, "cell", ("kind", "theta", "normal", "center", "radius"))
    return CellConfig(
        kind=_choice(section, "kind", DEFAULT_CELL.kind, "cell.kind", CELL_KINDS),
        theta=_float(section, "theta", DEFAULT_CELL.theta, "cell.theta"),
        normal=_int(section, "normal", DEFAULT_CELL.normal, "cell.normal"),
        center=_floats(section, "center", DEFAULT_CELL.center, "cell.center", size=2),
        radius=_float(section, "radius", DEFAULT_CELL.radius, "cell.radius"),
    )


def _grid_from_dict(data: Any) -> GridConfig:
    section = _section(data, "grid", ("cell_n", "domain", "m"))
    return GridConfig(
        cell_n=_int(section, "cell_n", DEFAULT_GRID.cell_n, "grid.cell_n"),
        domain=_floats(section, "domain", DEFAULT_GRID.domain, "grid.domain", size=2),
        m=_int(section, "m", DEFAULT_GRID.m, "grid.m"),
    )


def _load_from_dict(data: Any) -> LoadConfig:
    section = _section(data, "load", ("f", "a", "b", "alpha"))
    f = _get(section, "f", DEFAULT_LOAD.f)
    if not isinstance(f, list) or len(f) != 2 or not all(isinstance(item, str) for item in f):
        raise ConfigError("load.f", "expected a pair of expression strings")
    return LoadConfig(
        f=list(f),
        a=_floats(section, "a", DEFAULT_LOAD.a, "load.a", size=2),
        b=_floats(section, "b", DEFAULT_LOAD.b, "load.b", size=2),
        alpha=_float(section, "alpha", DEFAULT_LOAD.alpha, "load.alpha"),
    )


def _solver_from_dict(data: Any) -> SolverConfig:
    section = _section(data, "solver", ("rtol", "workers", "lambda_per"))
    workers = _int(section, "workers", DEFAULT_SOLVER.workers, "solver.workers")
    if workers < 1:
        raise ConfigError("solver.workers", f"must be >= 1, got {workers}")
    rtol = _float(section, "rtol", DEFAULT_SOLVER.rtol, "solver.rtol")
    if not 0 < rtol < 1:
        raise ConfigError("solver.rtol", f"must lie in (0, 1), got {rtol}")
    return SolverConfig(
        rtol=rtol,
        workers=workers,
        lambda_per=_bool(section, "lambda_per", DEFAULT_SOLVER.lambda_per, "solver.lambda_per"),
    )


def _wave_from_dict(data: Any) -> WaveConfig:
    section = _section(data, "wave", ("ms", "snapshots"))
    ms = _get(section, "ms", DEFAULT_WAVE.ms)
    if not isinstance(ms, list) or not ms:
        raise ConfigError("wave.ms", "expected a non-empty list of resolutions")
    values = [_int({"v": item}, "v", 0, f"wave.ms[{index}]") for index, item in enumerate(ms)]
    for index, value in enumerate(values):
        if value < 8:
            raise ConfigError(f"wave.ms[{index}]", f"resolution must be >= 8, got {value}")
    return WaveConfig(
        ms=values,
        snapshots=_bool(section, "snapshots", DEFAULT_WAVE.snapshots, "wave.snapshots"),
    )


TOP_LEVEL_KEYS = (
    "command",
    "phases",
    "project",
    "cell",
    "grid",
    "eps",
    "thetas",
    "k_grid",
    "load",
    "bc",
    "solver",
    "wave",
    "output_dir",
)


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    top = _section(data, "", TOP_LEVEL_KEYS)
    phases = _section(_get(top, "phases", {}), "phases", ("phase1", "phase2"))
    k_grid = _int(top, "k_grid", DEFAULT_CONFIG.k_grid, "k_grid")
    if k_grid < 4:
        raise ConfigError("k_grid", f"need at least 4 directions, got {k_grid}")
    output_dir = _get(top, "output_dir", DEFAULT_CONFIG.output_dir)
    if not isinstance(output_dir, str) or not output_dir.strip():
        raise ConfigError("output_dir", "expected a non-empty path string")
    return RunConfig(
        command=_choice(top, "command", DEFAULT_CONFIG.command, "command", COMMANDS),
        phase1=_phase_from_dict(phases.get("phase1"), "phases.phase1", DEFAULT_PHASE1),
        phase2=_phase_from_dict(phases.get("phase2"), "phases.phase2", DEFAULT_PHASE2),
        project=_bool(top, "project", DEFAULT_CONFIG.project, "project"),
        cell=_cell_from_dict(top.get("cell")),
        grid=_grid_from_dict(top.get("grid")),
        eps=_floats(top, "eps", DEFAULT_CONFIG.eps, "eps"),
        thetas=_floats(top, "thetas", DEFAULT_CONFIG.thetas, "thetas"),
        k_grid=k_grid,
        load=_load_from_dict(top.get("load")),
        bc=_choice(top, "bc", DEFAULT_CONFIG.bc, "bc", BC_MODES),
        solver=_solver_from_dict(top.get("solver")),
        wave=_wave_from_dict(top.get("wave")),
        output_dir=output_dir,
    )


def _phase_to_dict(phase: PhaseConfig) -> dict[str, Any]:
    return {"lambda": phase.lam, "mu": phase.mu, "rho": phase.rho}


def config_to_dict(config: RunConfig) -> dict[str, Any]:
    return {
        "command": config.command,
        "phases": {
            "phase1": _phase_to_dict(config.phase1),
            "phase2": _phase_to_dict(config.phase2),
        },
        "project": config.project,
        "cell": {
            "kind": config.cell.kind,
            "theta": config.cell.theta,
            "normal": config.cell.normal,
            "center": list(config.cell.center),
            "radius": config.cell.radius,
        },
        "grid": {
            "cell_n": config.grid.cell_n,
            "domain": list(config.grid.domain),
            "m": config.grid.m,
        },
        "eps": list(config.eps),
        "thetas": list(config.thetas),
        "k_grid": config.k_grid,
        "load": {
            "f": list(config.load.f),
            "a": list(config.load.a),
            "b": list(config.load.b),
            "alpha": config.load.alpha,
        },
        "bc": config.bc,
        "solver": {
            "rtol": config.solver.rtol,
            "workers": config.solver.workers,
            "lambda_per": config.solver.lambda_per,
        },
        "wave": {"ms": list(config.wave.ms), "snapshots": config.wave.snapshots},
        "output_dir": config.output_dir,
    }


def load_config(path: Path) -> RunConfig:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError("config", f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return config_from_dict(data)


def save_config(path: Path, config: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(config_to_dict(config), indent=2, sort_keys=True)
    path.write_text(payload + "\n", encoding="utf-8")


def with_command(config: RunConfig, command: str) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}, got {command!r}")
    return replace(config, command=command)


def phases(config: RunConfig) -> tuple[IsotropicPhase, IsotropicPhase]:
    """Physical phases; with `project` set, phase 2 is moved onto -lambda2 - mu2 = mu1."""
    p1 = IsotropicPhase(lam=config.phase1.lam, mu=config.phase1.mu, rho=config.phase1.rho)
    p2 = IsotropicPhase(lam=config.phase2.lam, mu=config.phase2.mu, rho=config.phase2.rho)
    if config.project:
        p2 = project_gutierrez(p1, p2)
    return p1, p2


def unit_cell(config: RunConfig) -> UnitCell:
    p1, p2 = phases(config)
    cell = config.cell
    if cell.kind == "layers":
        geometry: StraightLayers | DiskInclusion = StraightLayers(cell.theta, cell.normal)
    else:
        geometry = DiskInclusion(center=(cell.center[0], cell.center[1]), radius=cell.radius)
    return UnitCell(geometry=geometry, phase1=p1, phase2=p2)


def rect_domain(config: RunConfig) -> RectDomain:
    a, b = config.grid.domain
    return RectDomain(a, b, config.grid.m)


def load_spec(config: RunConfig) -> LoadSpec:
    load = config.load
    return LoadSpec(
        f=parse_load(load.f),
        a=(load.a[0], load.a[1]),
        b=(load.b[0], load.b[1]),
        alpha=load.alpha,
    )
