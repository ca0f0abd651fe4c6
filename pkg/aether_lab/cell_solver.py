"""Periodic cell problems: correctors, the homogenized tensor and Lambda_per."""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cell import StraightLayers, UnitCell, phase_labels, phase_tensors
from .errors import ConfigError, SolverError
from .fem import QuadMesh, assemble_stiffness, element_gradients, projected_cg, stress_load
from .logs import log_event
from .tensors import IsotropicPhase, Tensor4, iso_tensor, k_transform, se_constant, vec

CG_RTOL = 1e-10
EIGEN_TOL = 1e-8
ZERO_TOL = 1e-10
ALIGN_TOL = 1e-9

LOAD_CASES = (
    np.array([[1.0, 0.0], [0.0, 0.0]]),
    np.array([[0.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
)

PhaseLike = Union[IsotropicPhase, Tensor4]


def _log(level: str, message: str, **fields: Any) -> None:
    log_event(level, "cell_solver", message, **fields)


@dataclass(frozen=True, eq=False)
class CellGrid:
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int):
            raise ConfigError("grid.n", f"cell resolution must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise ConfigError("grid.n", f"cell resolution must be even and >= 8, got {self.n}")

    @cached_property
    def mesh(self) -> QuadMesh:
        return QuadMesh(self.n, self.n, 1.0 / self.n, periodic=True)

    @property
    def n_nodes(self) -> int:
        return self.n * self.n


@dataclass(frozen=True, eq=False)
class CorrectorField:
    values: np.ndarray
    macro: np.ndarray
    grid: CellGrid
    residuals: list[float] = field(default_factory=list)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def iterations(self) -> int:
        return max(len(self.residuals) - 1, 0)

    def mean(self) -> np.ndarray:
        return self.values.reshape(-1, 2).mean(axis=0)


def check_compatible(cell: UnitCell, grid: CellGrid) -> None:
    geometry = cell.geometry
    if isinstance(geometry, StraightLayers):
        steps = geometry.theta * grid.n
        if abs(steps - round(steps)) > ALIGN_TOL:
            raise ConfigError(
                "grid.n",
                f"theta*n must be an integer so interfaces align with elements "
                f"(theta={geometry.theta}, n={grid.n})",
            )


def cell_labels(cell: UnitCell, grid: CellGrid) -> np.ndarray:
    """Zero-based phase index at every quadrature point, shape (n_elements, 4)."""
    return phase_labels(cell, grid.mesh.quad_points) - 1


def cell_tables(cell: UnitCell, *, shifted: bool = False) -> np.ndarray:
    l1, l2 = phase_tensors(cell)
    if shifted:
        l1, l2 = k_transform(l1, cell.phase1.mu), k_transform(l2, cell.phase1.mu)
    return np.stack([l1.m, l2.m])


def assemble_cell_stiffness(
    cell: UnitCell, grid: CellGrid, *, shifted: bool = False
) -> sp.csr_matrix:
    """Stiffness from L(y), or from K(y) = L(y) + 2 mu1 Cof when shifted."""
    tables = cell_tables(cell, shifted=shifted)
    return assemble_stiffness(grid.mesh, cell_labels(cell, grid), tables)


def assemble_gradient_gram(grid: CellGrid) -> sp.csr_matrix:
    labels = np.zeros((grid.mesh.n_elements, 4), dtype=np.int64)
    return assemble_stiffness(grid.mesh, labels, np.eye(4)[None, :, :])


def zero_mean(vector: np.ndarray) -> np.ndarray:
    nodal = vector.reshape(-1, 2)
    return (nodal - nodal.mean(axis=0)).reshape(-1)


def solve_corrector(
    cell: UnitCell,
    grid: CellGrid,
    macro: Any,
    *,
    x0: np.ndarray | None = None,
    rtol: float = CG_RTOL,
    shifted: bool = False,
) -> CorrectorField:
    check_compatible(cell, grid)
    mesh = grid.mesh
    matrix_m = np.asarray(macro, dtype=float).reshape(2, 2)
    labels = cell_labels(cell, grid)
    tables = cell_tables(cell, shifted=shifted)
    stiffness = assemble_stiffness(mesh, labels, tables)
    rhs = stress_load(mesh, labels, tables, matrix_m)
    maxiter = 20 * grid.n * grid.n

    _log("info", "corrector_start", n=grid.n, macro=matrix_m.tolist(), shifted=shifted)
    try:
        solution, history = projected_cg(
            stiffness.dot, rhs, project=zero_mean, x0=x0, rtol=rtol, maxiter=maxiter
        )
    except SolverError:
        _log("error", "corrector_failed", n=grid.n, macro=matrix_m.tolist())
        raise
    solution = zero_mean(solution)
    _log("info", "corrector_done", n=grid.n, iterations=len(history) - 1, residual=history[-1])
    return CorrectorField(
        values=solution.reshape(grid.n, grid.n, 2),
        macro=matrix_m,
        grid=grid,
        residuals=history,
    )


def total_gradients(corrector: CorrectorField) -> np.ndarray:
    """M + grad v at every quadrature point, shape (n_elements, 4, 4)."""
    grads = element_gradients(corrector.grid.mesh, corrector.flat)
    return grads + vec(corrector.macro)[None, None, :]


def cell_energy(
    cell: UnitCell,
    left: CorrectorField,
    right: CorrectorField | None = None,
    *,
    shifted: bool = False,
) -> float:
    """Polarized energy of L(y) (or K(y)) over the cell for two corrector fields."""
    grid = left.grid
    labels = cell_labels(cell, grid)
    tables = cell_tables(cell, shifted=shifted)[labels]
    a = total_gradients(left)
    b = a if right is None else total_gradients(right)
    return float(grid.mesh.weight * np.einsum("eqi,eqij,eqj->", b, tables, a))


def homogenized_tensor(
    cell: UnitCell,
    grid: CellGrid,
    *,
    workers: int = 1,
    rtol: float = CG_RTOL,
) -> Tensor4:
    check_compatible(cell, grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            correctors = list(
                pool.map(lambda load: solve_corrector(cell, grid, load, rtol=rtol), LOAD_CASES)
            )
    else:
        correctors = [solve_corrector(cell, grid, load, rtol=rtol) for load in LOAD_CASES]

    form = np.zeros((3, 3))
    for a in range(3):
        for b in range(a, 3):
            form[a, b] = cell_energy(cell, correctors[a], correctors[b])
            form[b, a] = form[a, b]
    tensor = Tensor4.from_symmetric_form(form)
    _log("info", "homogenized", n=grid.n, tensor=tensor.to_dict())
    return tensor


def _as_tensor(phase: PhaseLike) -> Tensor4:
    return phase if isinstance(phase, Tensor4) else iso_tensor(phase)


def laminate_analytic(p1: PhaseLike, p2: PhaseLike, theta: float, normal: int = 1) -> Tensor4:
    """Rank-one laminate of p1 (volume fraction theta) and p2 with layers normal to e_normal.

    Each layer carries the constant gradient M + xi_i (x) n with theta xi1 + (1-theta) xi2 = 0
    and continuous tractions, so (A1 + c A2) xi1 = (L2 - L1) M n with c = theta / (1 - theta).
    """
    if not 0.0 < theta < 1.0:
        raise ConfigError("theta", f"volume fraction must lie in (0, 1), got {theta}")
    if normal not in (1, 2):
        raise ConfigError("normal", f"normal axis must be 1 or 2, got {normal}")
    l1, l2 = _as_tensor(p1), _as_tensor(p2)
    n = np.zeros(2)
    n[normal - 1] = 1.0
    c = theta / (1.0 - theta)
    system = l1.acoustic(n) + c * l2.acoustic(n)
    if not np.isfinite(np.linalg.cond(system)) or np.linalg.cond(system) > 1e12:
        raise ConfigError("phases", "layer system is singular for this phase combination")

    columns = []
    for index in range(4):
        macro = np.zeros(4)
        macro[index] = 1.0
        matrix_m = macro.reshape(2, 2)
        jump = (l2.apply(matrix_m) - l1.apply(matrix_m)) @ n
        xi1 = np.linalg.solve(system, jump)
        xi2 = -c * xi1
        stress = theta * l1.apply(matrix_m + np.outer(xi1, n)) + (1.0 - theta) * l2.apply(
            matrix_m + np.outer(xi2, n)
        )
        columns.append(vec(stress))
    m = np.column_stack(columns)
    return Tensor4(0.5 * (m + m.T))


@dataclass(frozen=True)
class ThetaRow:
    theta: float
    tensor: Tensor4
    se: float

    def csv_row(self) -> list[float]:
        t = self.tensor
        return [
            self.theta,
            t.component(1, 1, 1, 1),
            t.component(1, 1, 2, 2),
            t.component(1, 2, 1, 2),
            t.component(2, 2, 2, 2),
            self.se,
        ]


@dataclass(frozen=True)
class ThetaSweep:
    rows: list[ThetaRow]
    zero_theta: float | None
    argmin_theta: float | None

    header = ("theta", "L1111", "L1122", "L1212", "L2222", "se_constant")


def theta_sweep(
    p1: PhaseLike,
    p2: PhaseLike,
    thetas: Sequence[float],
    *,
    normal: int = 1,
    workers: int = 1,
) -> ThetaSweep:
    values = [float(theta) for theta in thetas]
    for theta in values:
        if not 0.0 < theta < 1.0:
            raise ConfigError("thetas", f"volume fractions must lie in (0, 1), got {theta}")

    def row(theta: float) -> ThetaRow:
        tensor = laminate_analytic(p1, p2, theta, normal)
        return ThetaRow(theta=theta, tensor=tensor, se=se_constant(tensor))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, values))
    else:
        rows = [row(theta) for theta in values]

    l2222 = [r.tensor.component(2, 2, 2, 2) for r in rows]
    zeros = [r.theta for r, value in zip(rows, l2222) if abs(value) <= ZERO_TOL]
    argmin = rows[int(np.argmin(l2222))].theta if rows else None
    return ThetaSweep(rows=rows, zero_theta=zeros[0] if zeros else None, argmin_theta=argmin)


def cell_pencil(cell: UnitCell, grid: CellGrid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and gradient Gram matrices with node 0 pinned (removes constants)."""
    stiffness = assemble_cell_stiffness(cell, grid)
    gram = assemble_gradient_gram(grid)
    keep = np.arange(2, grid.mesh.n_dofs)
    return stiffness[keep][:, keep].tocsr(), gram[keep][:, keep].tocsr()


def lambda_per_estimate(
    cell: UnitCell,
    grid: CellGrid,
    *,
    shift: float = 0.0,
    block: int = 4,
    tol: float = EIGEN_TOL,
    max_iter: int = 500,
    seed: int = 0,
) -> float:
    """Smallest eigenvalue of the (stiffness, gradient Gram) pencil on periodic fields.

    Subspace inverse iteration around `shift` with Rayleigh-Ritz; returns the Rayleigh
    quotient of the converged vector. With an indefinite stiffness the value found is the
    eigenvalue nearest the shift.
    """
    check_compatible(cell, grid)
    if block < 1:
        raise ConfigError("block", f"block size must be >= 1, got {block}")
    stiffness, gram = cell_pencil(cell, grid)
    try:
        factor = spla.splu((stiffness - shift * gram).tocsc())
    except RuntimeError as exc:
        raise SolverError(f"shifted pencil is singular at shift {shift}: {exc}") from exc

    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((stiffness.shape[0], block))
    previous = math.nan
    estimate = math.nan
    for iteration in range(1, max_iter + 1):
        basis, _ = np.linalg.qr(factor.solve(gram @ basis))
        reduced_a = basis.T @ (stiffness @ basis)
        reduced_g = basis.T @ (gram @ basis)
        values, vectors = scipy.linalg.eigh(
            0.5 * (reduced_a + reduced_a.T), 0.5 * (reduced_g + reduced_g.T)
        )
        order = np.argsort(np.abs(values - shift))
        values, vectors = values[order], vectors[:, order]
        basis = basis @ vectors
        previous, estimate = estimate, float(values[0])
        if iteration > 1 and abs(estimate - previous) <= tol * max(abs(estimate), 1e-300):
            vector = basis[:, 0]
            quotient = float(vector @ (stiffness @ vector)) / float(vector @ (gram @ vector))
            _log("info", "lambda_per", n=grid.n, value=quotient, iterations=iteration)
            return quotient

    _log("error", "lambda_per_stagnated", n=grid.n, iterates=[previous, estimate])
    raise SolverError(
        f"inverse iteration did not reach tol={tol} in {max_iter} iterations",
        iterates=[previous, estimate],
    )
