from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import ConfigError
from .tensors import (
    HypothesisCheck,
    IsotropicPhase,
    Tensor4,
    check_gutierrez_hypotheses,
    iso_tensor,
    se_constant,
    vse_constant,
)


@dataclass(frozen=True)
class StraightLayers:
    theta: float
    normal: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("cell.theta", f"volume fraction must lie in (0, 1), got {self.theta}")
        if self.normal not in (1, 2):
            raise ConfigError("cell.normal", f"normal axis must be 1 or 2, got {self.normal}")


@dataclass(frozen=True)
class DiskInclusion:
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.25

    def __post_init__(self) -> None:
        cx, cy = (float(value) for value in self.center)
        object.__setattr__(self, "center", (cx, cy))
        if not self.radius > 0:
            raise ConfigError("cell.radius", f"radius must be positive, got {self.radius}")
        inside = min(cx, cy, 1.0 - cx, 1.0 - cy) - self.radius
        if not inside > 0:
            raise ConfigError("cell.radius", "closed disk must lie inside the open unit cell")


Geometry = Union[StraightLayers, DiskInclusion]


@dataclass(frozen=True)
class UnitCell:
    geometry: Geometry
    phase1: IsotropicPhase
    phase2: IsotropicPhase

    @property
    def is_layered(self) -> bool:
        return isinstance(self.geometry, StraightLayers)

    @property
    def is_homogeneous(self) -> bool:
        return self.phase1 == self.phase2


@dataclass(frozen=True)
class GutierrezReport:
    checks: list[HypothesisCheck]
    vse: tuple[float, float]
    se: tuple[float, float]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def phase_labels(cell: UnitCell, points: Any) -> np.ndarray:
    """Phase label (1 or 2) of every point; interface points belong to phase 2."""
    y = np.mod(np.asarray(points, dtype=float), 1.0)
    geometry = cell.geometry
    if isinstance(geometry, StraightLayers):
        t = y[..., geometry.normal - 1]
        inside = (t > 0.0) & (t < geometry.theta)
    else:
        cx, cy = geometry.center
        inside = (y[..., 0] - cx) ** 2 + (y[..., 1] - cy) ** 2 < geometry.radius**2
    return np.where(inside, 1, 2)


def phase_at(cell: UnitCell, y: Any) -> int:
    return int(phase_labels(cell, np.asarray(y, dtype=float).reshape(2)))


def volume_fraction(cell: UnitCell) -> float:
    geometry = cell.geometry
    if isinstance(geometry, StraightLayers):
        return float(geometry.theta)
    return math.pi * geometry.radius**2


def phase_tensors(cell: UnitCell) -> tuple[Tensor4, Tensor4]:
    return iso_tensor(cell.phase1), iso_tensor(cell.phase2)


def coefficient_at(cell: UnitCell, eps: float, x: Any) -> tuple[Tensor4, float]:
    if not eps > 0:
        raise ConfigError("eps", f"scale must be positive, got {eps}")
    phase = cell.phase1 if phase_at(cell, np.asarray(x, dtype=float) / eps) == 1 else cell.phase2
    return iso_tensor(phase), phase.rho


def effective_density(cell: UnitCell) -> float:
    theta = volume_fraction(cell)
    return theta * cell.phase1.rho + (1.0 - theta) * cell.phase2.rho


def validate_gutierrez(cell: UnitCell) -> GutierrezReport:
    l1, l2 = phase_tensors(cell)
    return GutierrezReport(
        checks=check_gutierrez_hypotheses(cell.phase1, cell.phase2),
        vse=(vse_constant(l1), vse_constant(l2)),
        se=(se_constant(l1), se_constant(l2)),
    )
