from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from aether_lab.cell import DiskInclusion, StraightLayers, UnitCell
from aether_lab.cell_solver import (
    CellGrid,
    CorrectorField,
    cell_energy,
    cell_pencil,
    check_compatible,
    homogenized_tensor,
    lambda_per_estimate,
    laminate_analytic,
    solve_corrector,
    theta_sweep,
)
from aether_lab.errors import ConfigError
from aether_lab.tensors import IsotropicPhase, gutierrez_tensor, iso_tensor, se_constant

P1 = IsotropicPhase(lam=1.0, mu=1.0)
P2 = IsotropicPhase(lam=-3.0, mu=2.0)
GUTIERREZ = UnitCell(StraightLayers(0.5), P1, P2)


@pytest.mark.parametrize("n", [6, 9, 0, True, 16.0])
def test_cell_grid_rejects_invalid_resolution(n):
    with pytest.raises(ConfigError):
        CellGrid(n)


def test_interfaces_must_align_with_grid():
    cell = UnitCell(StraightLayers(0.3), P1, P2)
    with pytest.raises(ConfigError) as excinfo:
        check_compatible(cell, CellGrid(8))
    assert excinfo.value.field == "grid.n"
    check_compatible(cell, CellGrid(10))


def test_homogeneous_cell_reproduces_phase_tensor():
    cell = UnitCell(StraightLayers(0.5), P1, P1)
    tensor = homogenized_tensor(cell, CellGrid(8))
    np.testing.assert_allclose(tensor.m, iso_tensor(P1).m, atol=1e-10)


def test_corrector_is_zero_mean_and_converged():
    corrector = solve_corrector(GUTIERREZ, CellGrid(16), np.array([[1.0, 0.0], [0.0, 0.0]]))
    np.testing.assert_allclose(corrector.mean(), 0.0, atol=1e-14)
    assert corrector.residuals[-1] <= 1e-10
    assert corrector.iterations > 0
    # layered correctors depend on y1 only
    np.testing.assert_allclose(corrector.values, corrector.values[:, :1, :], atol=1e-8)


def test_gutierrez_cell_matches_closed_form():
    tensor = homogenized_tensor(GUTIERREZ, CellGrid(64))
    expected, _ = gutierrez_tensor(P1, P2)
    assert tensor.component(1, 1, 1, 1) == pytest.approx(1.5, abs=1e-8)
    assert tensor.component(1, 2, 1, 2) == pytest.approx(4.0 / 3.0, abs=1e-8)
    assert tensor.component(1, 1, 2, 2) == pytest.approx(-2.0, abs=1e-8)
    assert abs(tensor.component(2, 2, 2, 2)) <= 1e-8
    np.testing.assert_allclose(tensor.m, expected.m, atol=1e-8)


def test_worker_count_does_not_change_tensor():
    cell = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    grid = CellGrid(16)
    serial = homogenized_tensor(cell, grid)
    threaded = homogenized_tensor(cell, grid, workers=3)
    np.testing.assert_allclose(threaded.m, serial.m, atol=1e-12)


def test_disk_inclusion_stays_strongly_elliptic():
    cell = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    tensor = homogenized_tensor(cell, CellGrid(128), workers=3)
    assert tensor.is_minor_symmetric(1e-12)
    assert se_constant(tensor) > 0.0


def test_cell_energy_shift_is_determinant():
    rng = np.random.default_rng(11)
    grid = CellGrid(8)
    for _ in range(5):
        macro = rng.standard_normal((2, 2))
        field = CorrectorField(
            values=rng.standard_normal((8, 8, 2)), macro=macro, grid=grid, residuals=[]
        )
        gap = cell_energy(GUTIERREZ, field, shifted=True) - cell_energy(GUTIERREZ, field)
        assert gap == pytest.approx(4.0 * P1.mu * np.linalg.det(macro), abs=1e-10)


def test_laminate_analytic_gutierrez_values():
    tensor = laminate_analytic(P1, P2, 0.5)
    expected, _ = gutierrez_tensor(P1, P2)
    np.testing.assert_allclose(tensor.m, expected.m, atol=1e-12)


def test_laminate_analytic_homogeneous_and_rotated():
    np.testing.assert_allclose(laminate_analytic(P1, P1, 0.3).m, iso_tensor(P1).m, atol=1e-14)
    across = laminate_analytic(P1, P2, 0.3, normal=1)
    along = laminate_analytic(P1, P2, 0.3, normal=2)
    assert along.component(2, 2, 2, 2) == pytest.approx(across.component(1, 1, 1, 1))
    assert along.component(1, 1, 1, 1) == pytest.approx(across.component(2, 2, 2, 2))


def test_laminate_analytic_accepts_tensor_phases():
    tensor = laminate_analytic(iso_tensor(P1), iso_tensor(P2), 0.5)
    assert tensor.component(2, 2, 2, 2) == pytest.approx(0.0, abs=1e-12)


def test_laminate_analytic_rejects_bad_fraction():
    with pytest.raises(ConfigError):
        laminate_analytic(P1, P2, 1.0)


def test_theta_sweep_locates_degeneracy():
    sweep = theta_sweep(P1, P2, [0.3, 0.4, 0.45, 0.5])
    values = [row.tensor.component(2, 2, 2, 2) for row in sweep.rows]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert values[0] == pytest.approx(0.2)
    assert values[2] > 0.0
    assert abs(values[3]) <= 1e-10
    assert sweep.zero_theta == 0.5
    assert sweep.argmin_theta == 0.5
    assert sweep.rows[-1].csv_row()[0] == 0.5


def test_theta_sweep_without_zero():
    sweep = theta_sweep(P1, P2, [0.3, 0.4], workers=2)
    assert sweep.zero_theta is None
    assert sweep.argmin_theta == 0.4


def test_lambda_per_positive_for_gutierrez_cell():
    assert lambda_per_estimate(GUTIERREZ, CellGrid(32), block=6) > 0.0


def test_lambda_per_homogeneous_matches_dense_eigenvalue():
    cell = UnitCell(StraightLayers(0.5), P1, P1)
    grid = CellGrid(8)
    stiffness, gram = cell_pencil(cell, grid)
    dense = scipy.linalg.eigh(stiffness.toarray(), gram.toarray(), eigvals_only=True)
    estimate = lambda_per_estimate(cell, grid)
    assert estimate == pytest.approx(dense.min(), rel=0.05)
    assert estimate == pytest.approx(min(P1.mu, P1.lam + 2.0 * P1.mu), rel=1e-6)


def test_lambda_per_rejects_bad_block():
    with pytest.raises(ConfigError):
        lambda_per_estimate(GUTIERREZ, CellGrid(8), block=0)


@pytest.mark.parametrize(("theta", "n"), [(0.25, 16), (1.0 / 3.0, 12)])
def test_layered_cells_match_laminate_formula(theta, n):
    cell = UnitCell(StraightLayers(theta), P1, P2)
    tensor = homogenized_tensor(cell, CellGrid(n))
    np.testing.assert_allclose(tensor.m, laminate_analytic(P1, P2, theta).m, atol=1e-8)


def test_corrector_energy_does_not_increase_under_refinement():
    cell = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    macro = np.array([[1.0, 0.0], [0.0, 0.0]])
    energies = [
        cell_energy(cell, solve_corrector(cell, CellGrid(n), macro)) for n in (8, 16, 32)
    ]
    assert energies[1] <= energies[0] + 1e-10
    assert energies[2] <= energies[1] + 1e-10


def test_corrector_does_not_depend_on_start_vector():
    grid = CellGrid(16)
    cell = UnitCell(DiskInclusion(radius=0.3), P1, P2)
    macro = np.array([[0.0, 1.0], [1.0, 0.0]])
    cold = solve_corrector(cell, grid, macro)
    start = np.random.default_rng(5).standard_normal(2 * grid.n * grid.n)
    warm = solve_corrector(cell, grid, macro, x0=start)
    np.testing.assert_allclose(warm.values, cold.values, atol=1e-8)
