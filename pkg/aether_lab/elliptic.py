"""Dirichlet and mixed solves of -div(L grad u) + a u = b f on rectangles."""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp

from .cell import StraightLayers, UnitCell, phase_labels, volume_fraction
from .cell_solver import CellGrid, cell_tables, homogenized_tensor, laminate_analytic
from .errors import ConfigError
from .fem import (
    QuadMesh,
    assemble_mass,
    assemble_stiffness,
    element_values,
    load_vector,
    projected_cg,
)
from .loads import LoadSpec, VectorLoad
from .logs import log_event
from .tensors import Tensor4

CG_RTOL = 1e-10
DEGENERATE_TOL = 1e-10
ALIGN_TOL = 1e-9
RESOLUTION = 8


def _log(level: str, message: str, **fields: Any) -> None:
    log_event(level, "elliptic", message, **fields)


class BCMode(str, Enum):
    FULL_DIRICHLET = "dirichlet"
    GUTIERREZ_MIXED = "mixed"


@dataclass(frozen=True, eq=False)
class RectDomain:
    a: float
    b: float
    m: int

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("domain", f"side lengths must be positive, got ({self.a}, {self.b})")
        if self.m < 8:
            raise ConfigError("domain.m", f"resolution must be >= 8, got {self.m}")
        ratio = self.b / self.h
        if abs(ratio - round(ratio)) > ALIGN_TOL * max(ratio, 1.0):
            raise ConfigError("domain.m", "b / (a/m) must be an integer so elements are square")

    @property
    def h(self) -> float:
        return self.a / self.m

    @property
    def m_y(self) -> int:
        return int(round(self.b / self.h))

    @cached_property
    def mesh(self) -> QuadMesh:
        return QuadMesh(self.m, self.m_y, self.h)

    @classmethod
    def square_pi(cls, m: int) -> RectDomain:
        return cls(math.pi, math.pi, m)


@dataclass(frozen=True, eq=False)
class FieldGrid:
    domain: RectDomain
    values: np.ndarray
    energy: float = 0.0
    residuals: list[float] = field(default_factory=list)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def u1(self) -> np.ndarray:
        return self.values[..., 0]

    @property
    def u2(self) -> np.ndarray:
        return self.values[..., 1]

    @property
    def dofs(self) -> int:
        return self.values.size

    def coords(self) -> np.ndarray:
        return self.domain.mesh.node_coords.reshape(self.values.shape)

    def rows(self) -> list[list[float]]:
        """(x, y, u1, u2) per node, x-major."""
        coords = self.coords().reshape(-1, 2)
        nodal = self.values.reshape(-1, 2)
        return np.column_stack([coords, nodal]).tolist()


@dataclass(frozen=True, eq=False)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray

    def restrict(self, vector: np.ndarray) -> np.ndarray:
        return vector * self.free

    def solve(
        self, *, x0: np.ndarray | None = None, rtol: float = CG_RTOL
    ) -> tuple[np.ndarray, list[float]]:
        return projected_cg(
            self.matrix.dot,
            self.rhs,
            project=self.restrict,
            x0=x0,
            rtol=rtol,
            maxiter=20 * self.matrix.shape[0],
        )

    def energy(self, u: np.ndarray) -> float:
        return float(0.5 * u @ (self.matrix @ u) - self.rhs @ u)


def free_mask(domain: RectDomain, bc: BCMode) -> np.ndarray:
    mesh = domain.mesh
    free = np.ones((mesh.n_nodes, 2))
    sides = ("left", "right", "bottom", "top")
    for side in sides:
        free[mesh.boundary_nodes(side), 0] = 0.0
    u2_sides = sides if bc == BCMode.FULL_DIRICHLET else ("left", "right")
    for side in u2_sides:
        free[mesh.boundary_nodes(side), 1] = 0.0
    return free.reshape(-1)


def l2_norm(domain: RectDomain, values: np.ndarray) -> float:
    mesh = domain.mesh
    points = element_values(mesh, np.asarray(values, dtype=float).reshape(-1))
    return math.sqrt(mesh.weight * float(np.sum(points**2)))


def check_eps(domain: RectDomain, cell: UnitCell, eps: float) -> None:
    if not 0.0 < eps <= 1.0:
        raise ConfigError("eps", f"scale must lie in (0, 1], got {eps}")
    if cell.is_homogeneous:
        return
    h = domain.h
    if h > eps / RESOLUTION * (1.0 + ALIGN_TOL):
        raise ConfigError(
            "domain.m",
            f"element size {h:.4g} does not resolve eps={eps} (need h <= eps/{RESOLUTION})",
        )
    if isinstance(cell.geometry, StraightLayers):
        for steps in (eps / h, eps * cell.geometry.theta / h):
            if abs(steps - round(steps)) > ALIGN_TOL * max(steps, 1.0):
                raise ConfigError(
                    "domain.m", f"layer interfaces at eps={eps} do not align with element edges"
                )


def eps_system(
    domain: RectDomain,
    cell: UnitCell,
    eps: float,
    load: LoadSpec,
    *,
    shifted: bool = True,
) -> LinearSystem:
    """Fixed-scale system; the stiffness uses K(x/eps) unless shifted is False."""
    check_eps(domain, cell, eps)
    mesh = domain.mesh
    labels = phase_labels(cell, mesh.quad_points / eps) - 1
    a_weights, b_weights = load.phase_weights()
    stiffness = assemble_stiffness(mesh, labels, cell_tables(cell, shifted=shifted))
    mass = assemble_mass(mesh, a_weights[labels])
    rhs = load_vector(mesh, b_weights[labels][..., None] * load.f(mesh.quad_points))
    free = free_mask(domain, BCMode.FULL_DIRICHLET)
    return LinearSystem(matrix=(stiffness + mass).tocsr(), rhs=rhs * free, free=free)


def _solve(
    domain: RectDomain,
    system: LinearSystem,
    *,
    x0: np.ndarray | None,
    rtol: float,
    kind: str,
) -> FieldGrid:
    mesh = domain.mesh
    solution, history = system.solve(x0=x0, rtol=rtol)
    solution = system.restrict(solution)
    energy = system.energy(solution)
    _log(
        "info",
        "solved",
        kind=kind,
        dofs=mesh.n_dofs,
        iterations=len(history) - 1,
        residual=history[-1],
        energy=energy,
    )
    rows, cols = mesh.node_shape
    return FieldGrid(
        domain=domain,
        values=solution.reshape(rows, cols, 2),
        energy=energy,
        residuals=history,
    )


def solve_eps(
    domain: RectDomain,
    cell: UnitCell,
    eps: float,
    load: LoadSpec,
    *,
    x0: np.ndarray | None = None,
    rtol: float = CG_RTOL,
) -> FieldGrid:
    system = eps_system(domain, cell, eps, load)
    return _solve(domain, system, x0=x0, rtol=rtol, kind=f"eps={eps}")


def mixed_table(tensor: Tensor4) -> np.ndarray:
    """Stiffness table on X: the 1122 pairing moves onto d2u1 * d1u2; d2u2 carries nothing."""
    table = np.array(tensor.m, dtype=float)
    table[1, 2] += table[0, 3]
    table[2, 1] += table[3, 0]
    table[0, 3] = table[3, 0] = 0.0
    table[3, :] = 0.0
    table[:, 3] = 0.0
    return table


def hom_system(
    domain: RectDomain,
    tensor: Tensor4,
    abar: float,
    bbar: float,
    load: VectorLoad | LoadSpec,
    bc: BCMode,
) -> LinearSystem:
    bc = BCMode(bc)
    if bc == BCMode.GUTIERREZ_MIXED:
        l2222 = tensor.component(2, 2, 2, 2)
        if abs(l2222) > DEGENERATE_TOL:
            raise ConfigError("bc", f"mixed conditions need L2222 = 0, got {l2222:.3e}")
        table = mixed_table(tensor)
    else:
        table = np.array(tensor.m, dtype=float)
    if not abar > 0:
        raise ConfigError("abar", f"zeroth-order weight must be positive, got {abar}")
    f = load.f if isinstance(load, LoadSpec) else load
    mesh = domain.mesh
    labels = np.zeros((mesh.n_elements, 4), dtype=np.int64)
    stiffness = assemble_stiffness(mesh, labels, table[None, :, :])
    mass = assemble_mass(mesh, np.full((mesh.n_elements, 4), float(abar)))
    rhs = load_vector(mesh, bbar * f(mesh.quad_points))
    free = free_mask(domain, bc)
    return LinearSystem(matrix=(stiffness + mass).tocsr(), rhs=rhs * free, free=free)


def solve_hom(
    domain: RectDomain,
    tensor: Tensor4,
    abar: float,
    bbar: float,
    load: VectorLoad | LoadSpec,
    bc: BCMode = BCMode.FULL_DIRICHLET,
    *,
    rtol: float = CG_RTOL,
) -> FieldGrid:
    system = hom_system(domain, tensor, abar, bbar, load, bc)
    return _solve(domain, system, x0=None, rtol=rtol, kind=f"hom-{BCMode(bc).value}")


def weak_battery(domain: RectDomain) -> list[tuple[str, np.ndarray]]:
    """sin(j pi x1/a) sin(k pi x2/b) e_c at quadrature points for j, k in {1, 2}."""
    points = domain.mesh.quad_points
    battery = []
    for j in (1, 2):
        for k in (1, 2):
            profile = np.sin(j * math.pi * points[..., 0] / domain.a) * np.sin(
                k * math.pi * points[..., 1] / domain.b
            )
            for c in (0, 1):
                values = np.zeros(points.shape)
                values[..., c] = profile
                battery.append((f"sin{j}{k}e{c + 1}", values))
    return battery


def weak_distance(domain: RectDomain, u: np.ndarray, v: np.ndarray) -> float:
    """max over the battery of |int (u - v) . phi| / ||phi||."""
    mesh = domain.mesh
    diff = element_values(mesh, np.asarray(u, dtype=float).reshape(-1) - np.asarray(v).reshape(-1))
    best = 0.0
    for _, phi in weak_battery(domain):
        pairing = mesh.weight * float(np.sum(diff * phi))
        norm = math.sqrt(mesh.weight * float(np.sum(phi * phi)))
        best = max(best, abs(pairing) / norm)
    return best


@dataclass(frozen=True)
class ConvergenceRow:
    eps: float
    dofs: int
    d_weak: float
    energy: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list[ConvergenceRow]
    tensor: Tensor4
    bc: BCMode
    hom_energy: float
    order: float | None

    header = ("eps", "dofs", "d_weak", "energy")


def homogenized_for(cell: UnitCell, *, cell_n: int = 64, workers: int = 1) -> Tensor4:
    geometry = cell.geometry
    if isinstance(geometry, StraightLayers):
        return laminate_analytic(cell.phase1, cell.phase2, geometry.theta, geometry.normal)
    return homogenized_tensor(cell, CellGrid(cell_n), workers=workers)


def empirical_order(eps: Sequence[float], errors: Sequence[float]) -> float | None:
    pairs = [(e, d) for e, d in zip(eps, errors) if d > 0]
    if len(pairs) < 2:
        return None
    slope, _ = np.polyfit(np.log([e for e, _ in pairs]), np.log([d for _, d in pairs]), 1)
    return float(slope)


def convergence_study(
    domain: RectDomain,
    cell: UnitCell,
    load: LoadSpec,
    eps_list: Sequence[float],
    *,
    cell_n: int = 64,
    workers: int = 1,
    rtol: float = CG_RTOL,
) -> ConvergenceTable:
    values = [float(eps) for eps in eps_list]
    if not values:
        raise ConfigError("eps", "eps list must be non-empty")
    if any(later >= earlier for earlier, later in zip(values, values[1:])):
        raise ConfigError("eps", "eps list must be strictly decreasing")
    for eps in values:
        check_eps(domain, cell, eps)

    tensor = homogenized_for(cell, cell_n=cell_n, workers=workers)
    bc = (
        BCMode.GUTIERREZ_MIXED
        if abs(tensor.component(2, 2, 2, 2)) <= DEGENERATE_TOL
        else BCMode.FULL_DIRICHLET
    )
    abar, bbar = load.averaged(volume_fraction(cell))
    u0 = solve_hom(domain, tensor, abar, bbar, load, bc, rtol=rtol)

    def run(eps: float) -> FieldGrid:
        return solve_eps(domain, cell, eps, load, rtol=rtol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fields = list(pool.map(run, values))
    else:
        fields = [run(eps) for eps in values]

    rows = [
        ConvergenceRow(
            eps=eps,
            dofs=int(np.count_nonzero(free_mask(domain, BCMode.FULL_DIRICHLET))),
            d_weak=weak_distance(domain, u_eps.flat, u0.flat),
            energy=u_eps.energy,
        )
        for eps, u_eps in zip(values, fields)
    ]
    order = empirical_order(values, [row.d_weak for row in rows])
    _log("info", "convergence_study", bc=bc.value, d_weak=[row.d_weak for row in rows], order=order)
    return ConvergenceTable(rows=rows, tensor=tensor, bc=bc, hom_energy=u0.energy, order=order)
