from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .cell import (
    StraightLayers,
    UnitCell,
    effective_density,
    validate_gutierrez,
    volume_fraction,
)
from .cell_solver import (
    CellGrid,
    homogenized_tensor,
    lambda_per_estimate,
    laminate_analytic,
    theta_sweep,
)
from .config import (
    DEFAULT_CONFIG,
    RunConfig,
    load_config,
    load_spec,
    phases,
    rect_domain,
    save_config,
    unit_cell,
    with_command,
)
from .elastodyn import BENCHMARK_PHASES, BenchmarkReport, benchmark_order
from .elliptic import (
    DEGENERATE_TOL,
    BCMode,
    check_eps,
    convergence_study,
    homogenized_for,
    solve_eps,
    solve_hom,
)
from .errors import ConfigError, SolverError
from .logs import log_event, set_log_file
from .paths import log_path, output_dir, template_path
from .results import write_csv, write_json
from .tensors import (
    DispersionResult,
    Tensor4,
    dispersion,
    gutierrez_tensor,
    se_constant,
    tensor_dispersion,
    vse_constant,
)

CONFIG_NAME = "aether-lab.json"


def validate(config: RunConfig) -> None:
    """Build every object the command needs so bad input fails before anything is written."""
    cell = unit_cell(config)
    domain = rect_domain(config)
    load_spec(config)
    CellGrid(config.grid.cell_n)
    if config.command in ("solve", "converge"):
        for eps in config.eps:
            check_eps(domain, cell, eps)
    if config.command == "wave":
        _check_benchmark(config, cell)


def _start(out: Path, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    set_log_file(log_path(out))
    log_event("info", "cli", "command_start", command=command, version=__version__)


def _print_report(cell: UnitCell) -> None:
    report = validate_gutierrez(cell)
    print("Gutierrez hypotheses")
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        print(f"  {check.name}: {status} (residual {check.residual:.3g})")
    print(f"  vse: phase1={report.vse[0]:.6g} phase2={report.vse[1]:.6g}")
    print(f"  se:  phase1={report.se[0]:.6g} phase2={report.se[1]:.6g}")


def _check(config: RunConfig) -> int:
    cell = unit_cell(config)
    print(f"Config OK: command={config.command}")
    _print_report(cell)
    return 0


def _is_gutierrez_cell(cell: UnitCell) -> bool:
    geometry = cell.geometry
    return (
        isinstance(geometry, StraightLayers)
        and geometry.normal == 1
        and abs(geometry.theta - 0.5) <= 1e-12
        and validate_gutierrez(cell).passed
    )


def _check_benchmark(config: RunConfig, cell: UnitCell) -> None:
    """wave runs the fixed standing-wave benchmark, so the config must describe that medium."""
    if (cell.phase1, cell.phase2) != BENCHMARK_PHASES:
        raise ConfigError(
            "phases", "wave needs phase1 (lambda 1, mu 1) and phase2 (lambda -3, mu 2), rho 1"
        )
    if not _is_gutierrez_cell(cell):
        raise ConfigError("cell", "wave needs straight layers with theta 0.5 and normal 1")
    if config.bc == "dirichlet":
        raise ConfigError("bc", "wave runs with mixed conditions; use auto or mixed")


def _bc_mode(config: RunConfig, tensor: Tensor4) -> BCMode:
    if config.bc == "auto":
        degenerate = abs(tensor.component(2, 2, 2, 2)) <= DEGENERATE_TOL
        return BCMode.GUTIERREZ_MIXED if degenerate else BCMode.FULL_DIRICHLET
    return BCMode(config.bc)


def _tensor_rows(tensor: Tensor4) -> list[list[Any]]:
    names = ("e11", "e12", "e21", "e22")
    return [[names[row], *tensor.m[row].tolist()] for row in range(4)]


def run_ellipticity(config: RunConfig, out: Path) -> int:
    cell = unit_cell(config)
    report = validate_gutierrez(cell)
    rows = []
    for index, phase in enumerate((cell.phase1, cell.phase2)):
        vse, se = report.vse[index], report.se[index]
        rows.append([f"phase{index + 1}", phase.lam, phase.mu, vse, se, vse / 2.0, se / 2.0])
    write_csv(
        out / "ellipticity.csv",
        ("phase", "lambda", "mu", "vse", "se", "vse_half", "se_half"),
        rows,
        config,
    )
    write_csv(
        out / "hypotheses.csv",
        ("name", "passed", "residual"),
        [[check.name, check.passed, check.residual] for check in report.checks],
        config,
    )
    _print_report(cell)
    return 0


def run_homogenize(config: RunConfig, out: Path) -> int:
    cell = unit_cell(config)
    grid = CellGrid(config.grid.cell_n)
    tensor = homogenized_tensor(
        cell, grid, workers=config.solver.workers, rtol=config.solver.rtol
    )
    payload: dict[str, Any] = {
        "tensor": tensor.to_dict(),
        "matrix": tensor.m.tolist(),
        "vse_constant": vse_constant(tensor),
        "se_constant": se_constant(tensor),
        "rho_bar": effective_density(cell),
        "volume_fraction": volume_fraction(cell),
    }
    geometry = cell.geometry
    if isinstance(geometry, StraightLayers):
        analytic = laminate_analytic(cell.phase1, cell.phase2, geometry.theta, geometry.normal)
        payload["laminate"] = analytic.to_dict()
        payload["laminate_deviation"] = float(np.max(np.abs(analytic.m - tensor.m)))
    if config.solver.lambda_per:
        payload["lambda_per"] = lambda_per_estimate(cell, grid)
    write_json(out / "homogenized.json", payload, config)
    header = ("row", "e11", "e12", "e21", "e22")
    write_csv(out / "homogenized.csv", header, _tensor_rows(tensor), config)
    print("L0:")
    for key, value in tensor.to_dict().items():
        if abs(value) > 0:
            print(f"  L{key} = {value:.10g}")
    print(f"  se_constant = {payload['se_constant']:.6g}")
    return 0


def run_theta_sweep(config: RunConfig, out: Path) -> int:
    p1, p2 = phases(config)
    sweep = theta_sweep(
        p1, p2, config.thetas, normal=config.cell.normal, workers=config.solver.workers
    )
    write_csv(out / "theta_sweep.csv", sweep.header, [row.csv_row() for row in sweep.rows], config)
    print(f"zero of L2222: {sweep.zero_theta if sweep.zero_theta is not None else '(none)'}")
    print(f"argmin of L2222: {sweep.argmin_theta}")
    return 0


def _dispersion_rows(results: list[tuple[float, DispersionResult]]) -> list[list[Any]]:
    rows = []
    for angle, result in results:
        first, second = result.modes
        rows.append(
            [
                angle,
                first.omega,
                second.omega,
                *first.eta.tolist(),
                *second.eta.tolist(),
                result.zero_mode,
                result.negative_mode,
            ]
        )
    return rows


def run_dispersion(config: RunConfig, out: Path) -> int:
    cell = unit_cell(config)
    rho_bar = effective_density(cell)
    if _is_gutierrez_cell(cell):
        _, moduli = gutierrez_tensor(cell.phase1, cell.phase2)

        def solve(k: np.ndarray) -> DispersionResult:
            return dispersion(moduli, rho_bar, k)

    else:
        tensor = homogenized_for(cell, cell_n=config.grid.cell_n, workers=config.solver.workers)

        def solve(k: np.ndarray) -> DispersionResult:
            return tensor_dispersion(tensor, rho_bar, k)

    results = []
    for index in range(config.k_grid):
        angle = 360.0 * index / config.k_grid
        radians = math.radians(angle)
        k = np.array([math.cos(radians), math.sin(radians)])
        results.append((angle, solve(k / np.linalg.norm(k))))
    header = (
        "angle",
        "omega1",
        "omega2",
        "eta1_1",
        "eta1_2",
        "eta2_1",
        "eta2_2",
        "zero_mode",
        "negative_mode",
    )
    write_csv(out / "dispersion.csv", header, _dispersion_rows(results), config)
    zeros = [angle for angle, result in results if result.zero_mode]
    print(f"zero modes at angles: {', '.join(f'{a:g}' for a in zeros) if zeros else '(none)'}")
    return 0


def run_solve(config: RunConfig, out: Path) -> int:
    cell = unit_cell(config)
    domain = rect_domain(config)
    load = load_spec(config)
    tensor = homogenized_for(cell, cell_n=config.grid.cell_n, workers=config.solver.workers)
    bc = _bc_mode(config, tensor)
    abar, bbar = load.averaged(volume_fraction(cell))
    header = ("x", "y", "u1", "u2")

    u0 = solve_hom(domain, tensor, abar, bbar, load, bc, rtol=config.solver.rtol)
    write_csv(out / "solution_hom.csv", header, u0.rows(), config)
    summary = [["hom", "", u0.dofs, u0.energy]]
    for index, eps in enumerate(config.eps):
        field = solve_eps(domain, cell, eps, load, rtol=config.solver.rtol)
        write_csv(out / f"solution_eps_{index}.csv", header, field.rows(), config)
        summary.append([f"eps_{index}", eps, field.dofs, field.energy])
    write_csv(out / "solve_summary.csv", ("field", "eps", "dofs", "energy"), summary, config)
    print(f"homogenized ({bc.value}): energy={u0.energy:.10g}")
    for name, eps, _, energy in summary[1:]:
        print(f"{name} (eps={eps}): energy={energy:.10g}")
    return 0


def run_converge(config: RunConfig, out: Path) -> int:
    table = convergence_study(
        rect_domain(config),
        unit_cell(config),
        load_spec(config),
        config.eps,
        cell_n=config.grid.cell_n,
        workers=config.solver.workers,
        rtol=config.solver.rtol,
    )
    rows = [[row.eps, row.dofs, row.d_weak, row.energy] for row in table.rows]
    write_csv(out / "convergence.csv", table.header, rows, config)
    for row in table.rows:
        print(f"eps={row.eps:g}: d_weak={row.d_weak:.4e}")
    order = f"{table.order:.3f}" if table.order is not None else "(n/a)"
    print(f"empirical order (not asserted): {order}")
    return 0


def _write_wave(out: Path, report: BenchmarkReport, config: RunConfig) -> None:
    rows = [[r.m, r.dt, r.steps, r.max_error, r.drift] for r in report.results]
    write_csv(out / "wave_benchmark.csv", report.header, rows, config)
    finest = report.results[-1]
    write_csv(out / "energy.csv", finest.series.header, finest.series.rows(), config)
    if config.wave.snapshots:
        trajectory = finest.trajectory
        coords = trajectory.domain.mesh.node_coords
        for index, t in enumerate(trajectory.times):
            nodal = trajectory.displacements[index].reshape(-1, 2)
            rows = np.column_stack([coords, nodal]).tolist()
            write_csv(out / f"snapshot_{index}.csv", ("x", "y", "u1", "u2"), rows, config)
            log_event("info", "cli", "snapshot", index=index, t=float(t))


def run_wave(config: RunConfig, out: Path) -> int:
    report = benchmark_order(tuple(config.wave.ms))
    _write_wave(out, report, config)
    for result in report.results:
        print(f"m={result.m}: max_error={result.max_error:.4e} drift={result.drift:.2e}")
    if report.order is not None:
        print(f"observed order: {report.order:.3f}")
    return 0


def cmd_init(args: argparse.Namespace) -> int:
    if args.config:
        path = Path(args.config).expanduser()
    else:
        path = output_dir(args.out, DEFAULT_CONFIG.output_dir) / CONFIG_NAME
    if path.exists():
        print(f"Config already exists: {path}")
        return 0
    save_config(path, load_config(template_path()))
    print(f"Created config: {path}")
    return 0


COMMAND_HANDLERS = {
    "ellipticity": (run_ellipticity, "Phase ellipticity constants and Gutierrez hypotheses"),
    "homogenize": (run_homogenize, "Homogenized tensor from periodic cell problems"),
    "theta-sweep": (run_theta_sweep, "Laminate tensor across volume fractions"),
    "dispersion": (run_dispersion, "Plane-wave dispersion of the homogenized medium"),
    "solve": (run_solve, "Fixed-scale and homogenized elliptic solves"),
    "converge": (run_converge, "Weak-convergence study over a list of scales"),
    "wave": (run_wave, "Transverse plane-wave benchmark on (0, pi)^2 (Gutierrez phases)"),
}


def _fail(exc: ConfigError | SolverError) -> int:
    if isinstance(exc, ConfigError):
        log_event("error", "cli", "config_error", field=exc.field, detail=exc.detail)
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    log_event("error", "cli", "solver_error", detail=str(exc))
    print(f"solver error: {exc}", file=sys.stderr)
    return 1


def run(config: RunConfig, out: Path) -> int:
    """Validate, then execute config.command into out.

    Returns 0 on success, 2 on a configuration error (nothing written) and 1 on a
    solver error.
    """
    try:
        validate(config)
        _start(out, config.command)
        runner, _ = COMMAND_HANDLERS[config.command]
        return runner(config, out)
    except (ConfigError, SolverError) as exc:
        return _fail(exc)
    finally:
        set_log_file(None)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(Path(args.config).expanduser()) if args.config else DEFAULT_CONFIG
        config = with_command(config, args.command)
        if args.check:
            validate(config)
            return _check(config)
    except ConfigError as exc:
        return _fail(exc)
    return run(config, output_dir(args.out, config.output_dir))


def main(argv: list[str] | None = None) -> int:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=None, help="Run configuration (JSON)")
    shared.add_argument("--out", default=None, help="Output directory")
    shared.add_argument("--check", action="store_true", help="Validate only; write nothing")

    parser = argparse.ArgumentParser(
        prog="aether-lab", description="Homogenization and elastodynamics lab"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, (_, help_text) in COMMAND_HANDLERS.items():
        sub = subparsers.add_parser(name, help=help_text, parents=[shared])
        sub.set_defaults(func=cmd_run)

    init_parser = subparsers.add_parser("init", help="Write a template run configuration")
    init_parser.add_argument("--config", default=None, help="Path of the config to create")
    init_parser.add_argument("--out", default=None, help="Directory for aether-lab.json")
    init_parser.set_defaults(func=cmd_init)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
