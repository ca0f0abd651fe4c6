from __future__ import annotations

import math

import numpy as np
import pytest

from aether_lab.cell import (
    DiskInclusion,
    StraightLayers,
    UnitCell,
    coefficient_at,
    effective_density,
    phase_at,
    phase_labels,
    validate_gutierrez,
    volume_fraction,
)
from aether_lab.errors import ConfigError
from aether_lab.tensors import IsotropicPhase, iso_tensor

P1 = IsotropicPhase(lam=1.0, mu=1.0, rho=1.0)
P2 = IsotropicPhase(lam=-3.0, mu=2.0, rho=3.0)


def _layers(theta: float = 0.5, normal: int = 1) -> UnitCell:
    return UnitCell(StraightLayers(theta, normal), P1, P2)


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.2, 1.5])
def test_layers_reject_volume_fraction_outside_open_interval(theta: float):
    with pytest.raises(ConfigError) as excinfo:
        StraightLayers(theta)
    assert excinfo.value.field == "cell.theta"


def test_layers_reject_unknown_normal():
    with pytest.raises(ConfigError):
        StraightLayers(0.5, normal=3)


@pytest.mark.parametrize(
    ("center", "radius"),
    [((0.5, 0.5), 0.5), ((0.2, 0.5), 0.25), ((0.5, 0.5), 0.0)],
)
def test_disk_must_lie_strictly_inside_cell(center: tuple[float, float], radius: float):
    with pytest.raises(ConfigError):
        DiskInclusion(center=center, radius=radius)


def test_layer_labels_put_interfaces_in_phase_two():
    cell = _layers()
    points = np.array([[0.25, 0.3], [0.75, 0.3], [0.5, 0.1], [0.0, 0.9], [1.25, 0.0]])
    np.testing.assert_array_equal(phase_labels(cell, points), [1, 2, 2, 2, 1])


def test_layer_labels_follow_normal_axis():
    cell = _layers(normal=2)
    assert phase_at(cell, (0.9, 0.25)) == 1
    assert phase_at(cell, (0.25, 0.9)) == 2


def test_disk_labels():
    cell = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    assert phase_at(cell, (0.5, 0.5)) == 1
    assert phase_at(cell, (0.05, 0.05)) == 2
    assert phase_at(cell, (0.8, 0.5)) == 2
    assert phase_at(cell, (1.5, 1.5)) == 1


def test_volume_fraction_and_density():
    layers = _layers(theta=0.25)
    assert volume_fraction(layers) == 0.25
    assert effective_density(layers) == pytest.approx(0.25 * 1.0 + 0.75 * 3.0)

    disk = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    assert volume_fraction(disk) == pytest.approx(math.pi * 0.09)


def test_coefficient_at_rescales_by_eps():
    cell = _layers()
    tensor, rho = coefficient_at(cell, 0.5, (0.1, 0.0))
    np.testing.assert_array_equal(tensor.m, iso_tensor(P1).m)
    assert rho == 1.0
    tensor, rho = coefficient_at(cell, 0.5, (0.4, 0.0))
    np.testing.assert_array_equal(tensor.m, iso_tensor(P2).m)
    assert rho == 3.0


def test_coefficient_at_rejects_nonpositive_eps():
    with pytest.raises(ConfigError):
        coefficient_at(_layers(), 0.0, (0.1, 0.1))


def test_homogeneous_cell_detection():
    assert UnitCell(StraightLayers(0.5), P1, P1).is_homogeneous
    assert not _layers().is_homogeneous
    assert _layers().is_layered


def test_validate_gutierrez_report():
    report = validate_gutierrez(_layers())
    assert report.passed
    assert report.vse == pytest.approx((2.0, -2.0))
    assert report.se == pytest.approx((2.0, 2.0), abs=1e-9)


def test_validate_gutierrez_flags_failures():
    cell = UnitCell(StraightLayers(0.5), P1, IsotropicPhase(lam=1.0, mu=2.0))
    report = validate_gutierrez(cell)
    assert not report.passed
    assert [check.name for check in report.checks if not check.passed] == [
        "0 < -lambda2 - mu2",
        "-lambda2 - mu2 = mu1",
    ]


@pytest.mark.parametrize(
    "cell",
    [_layers(0.3), _layers(0.7, normal=2), UnitCell(DiskInclusion(radius=0.3), P1, P2)],
)
def test_volume_fraction_matches_monte_carlo(cell):
    samples = 1_000_000
    rng = np.random.default_rng(20240611)
    hits = np.count_nonzero(phase_labels(cell, rng.random((samples, 2))) == 1) / samples
    theta = volume_fraction(cell)
    standard_error = math.sqrt(theta * (1.0 - theta) / samples)
    assert abs(hits - theta) <= 3.0 * standard_error


@pytest.mark.parametrize(
    "cell", [_layers(0.3), UnitCell(DiskInclusion(radius=0.3), P1, P2)]
)
def test_volume_fraction_matches_grid_count(cell):
    n = 1024
    centers = (np.arange(n) + 0.5) / n
    points = np.stack(np.meshgrid(centers, centers, indexing="ij"), axis=-1)
    fraction = np.count_nonzero(phase_labels(cell, points) == 1) / n**2
    assert abs(fraction - volume_fraction(cell)) <= 4.0 / n


@pytest.mark.parametrize(
    "cell", [_layers(0.5), _layers(0.25, normal=2), UnitCell(DiskInclusion(radius=0.3), P1, P2)]
)
def test_phase_at_is_one_periodic(cell):
    ticks = np.arange(16) / 16.0 + 1.0 / 32.0
    for y1 in ticks:
        for y2 in ticks:
            base = phase_at(cell, (y1, y2))
            for shift in ((1, 0), (0, -2), (3, 5), (-4, -1)):
                assert phase_at(cell, (y1 + shift[0], y2 + shift[1])) == base
