"""Bilinear quadrilateral elements on uniform square grids.

Node (i, j) sits at (origin + h*i, origin + h*j); element (i, j) has local nodes
(i, j), (i+1, j), (i+1, j+1), (i, j+1). Vector fields interleave components, so
dof 2*node + c holds component c. Gradients at quadrature points are flattened as
(d1 v1, d2 v1, d1 v2, d2 v2), matching the Tensor4 basis.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .logs import log_event

_G = 0.5 / math.sqrt(3.0)
GAUSS_REF = np.array(
    [
        [0.5 - _G, 0.5 - _G],
        [0.5 + _G, 0.5 - _G],
        [0.5 + _G, 0.5 + _G],
        [0.5 - _G, 0.5 + _G],
    ]
)
LOCAL_NODES = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def _log(level: str, message: str, **fields: Any) -> None:
    log_event(level, "fem", message, **fields)


def _shape(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    values = np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dxi = np.array([-(1 - eta), 1 - eta, eta, -eta])
    deta = np.array([-(1 - xi), -xi, xi, 1 - xi])
    return values, dxi, deta


@dataclass(frozen=True, eq=False)
class QuadMesh:
    nx: int
    ny: int
    h: float
    periodic: bool = False

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def node_shape(self) -> tuple[int, int]:
        if self.periodic:
            return self.nx, self.ny
        return self.nx + 1, self.ny + 1

    @property
    def n_nodes(self) -> int:
        rows, cols = self.node_shape
        return rows * cols

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def weight(self) -> float:
        return self.h * self.h / 4.0

    def node_id(self, i: Any, j: Any) -> Any:
        rows, cols = self.node_shape
        if self.periodic:
            return np.mod(i, rows) * cols + np.mod(j, cols)
        return i * cols + j

    @cached_property
    def node_coords(self) -> np.ndarray:
        rows, cols = self.node_shape
        ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
        return np.stack([ii * self.h, jj * self.h], axis=-1).reshape(-1, 2)

    @cached_property
    def element_nodes(self) -> np.ndarray:
        ei, ej = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        ei, ej = ei.ravel(), ej.ravel()
        return np.stack(
            [self.node_id(ei + di, ej + dj) for di, dj in LOCAL_NODES], axis=1
        ).astype(np.int64)

    @cached_property
    def edof(self) -> np.ndarray:
        nodes = self.element_nodes
        edof = np.empty((self.n_elements, 8), dtype=np.int64)
        edof[:, 0::2] = 2 * nodes
        edof[:, 1::2] = 2 * nodes + 1
        return edof

    @cached_property
    def quad_points(self) -> np.ndarray:
        ei, ej = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        corners = np.stack([ei.ravel(), ej.ravel()], axis=-1) * self.h
        return corners[:, None, :] + GAUSS_REF[None, :, :] * self.h

    @cached_property
    def operators(self) -> tuple[np.ndarray, np.ndarray]:
        """Gradient operators B (4 quad, 4, 8) and shape operators N (4 quad, 2, 8)."""
        grad = np.zeros((4, 4, 8))
        shape = np.zeros((4, 2, 8))
        for q, (xi, eta) in enumerate(GAUSS_REF):
            values, dxi, deta = _shape(xi, eta)
            dx, dy = dxi / self.h, deta / self.h
            grad[q, 0, 0::2] = dx
            grad[q, 1, 0::2] = dy
            grad[q, 2, 1::2] = dx
            grad[q, 3, 1::2] = dy
            shape[q, 0, 0::2] = values
            shape[q, 1, 1::2] = values
        return grad, shape

    def boundary_nodes(self, side: str) -> np.ndarray:
        if self.periodic:
            return np.empty(0, dtype=np.int64)
        rows, cols = self.node_shape
        if side == "left":
            return self.node_id(0, np.arange(cols))
        if side == "right":
            return self.node_id(rows - 1, np.arange(cols))
        if side == "bottom":
            return self.node_id(np.arange(rows), 0)
        if side == "top":
            return self.node_id(np.arange(rows), cols - 1)
        raise ValueError(f"unknown side: {side}")


def _scatter(mesh: QuadMesh, element_matrices: np.ndarray) -> sp.csr_matrix:
    edof = mesh.edof
    rows = np.broadcast_to(edof[:, :, None], element_matrices.shape).ravel()
    cols = np.broadcast_to(edof[:, None, :], element_matrices.shape).ravel()
    matrix = sp.coo_matrix(
        (element_matrices.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)
    )
    return matrix.tocsr()


def assemble_stiffness(mesh: QuadMesh, labels: np.ndarray, tables: np.ndarray) -> sp.csr_matrix:
    """sum_e sum_q w B_q^T T[labels[e, q]] B_q, with tables of shape (P, 4, 4)."""
    grad, _ = mesh.operators
    tables = np.asarray(tables, dtype=float)
    per_point = mesh.weight * np.einsum("qia,pij,qjb->pqab", grad, tables, grad)
    quad_index = np.arange(4)[None, :]
    element = per_point[labels, quad_index].sum(axis=1)
    return _scatter(mesh, element)


def assemble_mass(mesh: QuadMesh, weights: np.ndarray) -> sp.csr_matrix:
    """Consistent mass with a scalar weight per quadrature point, shape (n_elements, 4)."""
    _, shape = mesh.operators
    per_point = mesh.weight * np.einsum("qca,qcb->qab", shape, shape)
    element = np.einsum("eq,qab->eab", np.asarray(weights, dtype=float), per_point)
    return _scatter(mesh, element)


def lumped(mass: sp.spmatrix) -> np.ndarray:
    return np.asarray(mass.sum(axis=1)).ravel()


def _gather(mesh: QuadMesh, element_vectors: np.ndarray) -> np.ndarray:
    return np.bincount(
        mesh.edof.ravel(), weights=element_vectors.ravel(), minlength=mesh.n_dofs
    )


def load_vector(mesh: QuadMesh, values: np.ndarray) -> np.ndarray:
    """sum_e sum_q w N_q^T f(x_q) for values of shape (n_elements, 4, 2)."""
    _, shape = mesh.operators
    element = mesh.weight * np.einsum("qca,eqc->ea", shape, values)
    return _gather(mesh, element)


def stress_load(mesh: QuadMesh, labels: np.ndarray, tables: np.ndarray, macro: Any) -> np.ndarray:
    """-sum_e sum_q w B_q^T T[labels] vec(macro): right-hand side of a cell problem."""
    grad, _ = mesh.operators
    stresses = np.asarray(tables, dtype=float) @ np.asarray(macro, dtype=float).reshape(4)
    per_point = -mesh.weight * np.einsum("qia,pi->pqa", grad, stresses)
    element = per_point[labels, np.arange(4)[None, :]].sum(axis=1)
    return _gather(mesh, element)


def element_gradients(mesh: QuadMesh, u: np.ndarray) -> np.ndarray:
    grad, _ = mesh.operators
    return np.einsum("qij,ej->eqi", grad, u[mesh.edof])


def element_values(mesh: QuadMesh, u: np.ndarray) -> np.ndarray:
    _, shape = mesh.operators
    return np.einsum("qcj,ej->eqc", shape, u[mesh.edof])


def projected_cg(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    *,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
    rtol: float = 1e-10,
    maxiter: int = 10000,
) -> tuple[np.ndarray, list[float]]:
    """Conjugate gradients with every iterate projected onto a subspace.

    Returns the solution and the relative residual history; raises SolverError when
    the tolerance is not met within maxiter or the operator is not positive there.
    """

    def proj(vector: np.ndarray) -> np.ndarray:
        return vector if project is None else project(vector)

    b = proj(np.asarray(rhs, dtype=float))
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), [0.0]

    x = np.zeros_like(b) if x0 is None else proj(np.array(x0, dtype=float))
    r = b - proj(matvec(x))
    d = r.copy()
    rr = float(r @ r)
    history = [math.sqrt(rr) / b_norm]

    for _ in range(maxiter):
        if history[-1] <= rtol:
            return x, history
        ad = proj(matvec(d))
        curvature = float(d @ ad)
        if curvature <= 0.0:
            _log("error", "cg_breakdown", curvature=curvature, iterations=len(history) - 1)
            raise SolverError(
                "operator is not positive definite on the solve subspace", residuals=history
            )
        alpha = rr / curvature
        x += alpha * d
        r -= alpha * ad
        rr_next = float(r @ r)
        history.append(math.sqrt(rr_next) / b_norm)
        d = r + (rr_next / rr) * d
        rr = rr_next

    if history[-1] <= rtol:
        return x, history
    _log("error", "cg_not_converged", iterations=maxiter, residual=history[-1])
    raise SolverError(
        f"conjugate gradients did not reach rtol={rtol} in {maxiter} iterations "
        f"(residual {history[-1]:.3e})",
        residuals=history,
    )
