# tests/test_oracle.py

import numpy as np
import pytest

from conftest import HarmonicSiteModel, assert_close_relative
from exciton_pimc.engine.estimator import bead_exponential
from exciton_pimc.engine.hamiltonian import build_dimer
from exciton_pimc.engine.oracle import (
    GridSpec,
    build_grid_hamiltonian,
    check_support,
    exact_nuclear_density,
    exact_reduced_density,
    finite_m_quadrature,
    grid_refinement_delta,
    sinc_dvr_kinetic,
    solve_grid,
)
from exciton_pimc.errors import GridSizeError
from exciton_pimc.models.parameter_models import DimerParameters

BETA_30K = 1.0 / (3.1668115634e-6 * 30.0)
ALEXANDER_GRID = GridSpec(lo=[-5.0], hi=[23.0], n_points=[141])


def _direct_single_bead(model, beta, grid):
    """Trapezoid sum of exp(-beta V_g) exp(-beta E) over the grid."""
    points = grid.points()
    dx = grid.spacing[0]
    total = np.zeros((model.n_sites, model.n_sites))
    for i, r in enumerate(points):
        weight = dx * (0.5 if i in (0, len(points) - 1) else 1.0)
        total += weight * np.exp(-beta * model.ground_potential(r)) * bead_exponential(model.gap_matrix(r), beta)
    return total / np.trace(total)


class TestGridSpec:
    def test_axes_and_points(self):
        grid = GridSpec([0.0, -1.0], [1.0, 1.0], [16, 21])
        assert grid.size == 336 and grid.shape == (16, 21)
        points = grid.points()
        assert points.shape == (336, 2)
        np.testing.assert_allclose(points[1], [0.0, -0.9])
        np.testing.assert_allclose(grid.spacing, [1.0 / 15, 0.1])
        assert grid.refined().n_points == [31, 41]

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec([0.0], [1.0], [8])
        with pytest.raises(ValueError):
            GridSpec([1.0], [0.0], [32])
        with pytest.raises(ValueError):
            GridSpec([0.0, 0.0], [1.0], [32])


class TestGridHamiltonian:
    def test_kinetic_matrix_is_symmetric(self):
        t = sinc_dvr_kinetic(20, 0.1, 2.0)
        np.testing.assert_array_equal(t, t.T)
        assert t[0, 0] == pytest.approx(np.pi**2 / 3 / (2 * 2.0 * 0.01))

    def test_harmonic_levels(self):
        solution = solve_grid(HarmonicSiteModel(), GridSpec([-10.0], [10.0], [201]))
        np.testing.assert_allclose(solution.energies[:10], np.arange(10) + 0.5, atol=1e-8)

    def test_zero_coupling_is_block_diagonal(self):
        model = build_dimer(DimerParameters(J=0.0, m1=1e3, m2=1e3))
        grid = GridSpec([-2.0, -2.0], [4.0, 4.0], [16, 16])
        h = build_grid_hamiltonian(model, grid)
        np.testing.assert_array_equal(h[: grid.size, grid.size :], 0.0)
        np.testing.assert_array_equal(h, h.T)

    def test_size_cap(self, dimer):
        with pytest.raises(GridSizeError):
            build_grid_hamiltonian(dimer, GridSpec([-1.0, -1.0], [1.0, 1.0], [100, 101]))

    def test_dimension_mismatch(self, dimer):
        with pytest.raises(ValueError):
            solve_grid(dimer, GridSpec([-1.0], [1.0], [16]))


class TestExactDensities:
    def test_harmonic_thermal_width(self):
        grid = GridSpec([-10.0], [10.0], [201])
        density = exact_nuclear_density(HarmonicSiteModel(), 1.0, grid)
        x, dx = grid.axes[0], grid.spacing[0]
        assert density.sum() * dx == pytest.approx(1.0, abs=1e-12)
        variance = float(np.sum(x**2 * density) * dx)
        assert variance == pytest.approx(0.5 / np.tanh(0.5), rel=1e-6)

    def test_symmetric_dimer_has_equal_populations(self, light_symmetric_dimer):
        grid = GridSpec([-4.0, -4.0], [6.0, 6.0], [24, 24])
        rho = exact_reduced_density(light_symmetric_dimer, 1.0 / (3.1668115634e-6 * 300.0), grid)
        np.testing.assert_allclose(np.diag(rho), [0.5, 0.5], atol=1e-10)
        np.testing.assert_allclose(rho, rho.T, atol=1e-12)
        density = exact_nuclear_density(light_symmetric_dimer, 1.0 / (3.1668115634e-6 * 300.0), grid)
        np.testing.assert_allclose(density, density.T, atol=1e-10 * density.max())

    def test_reduced_density_is_trace_normalized(self, alexander):
        rho = exact_reduced_density(alexander, BETA_30K, ALEXANDER_GRID)
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(rho, rho.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(rho) > -1e-12)

    def test_cold_limit_projects_on_the_ground_state(self, alexander):
        solution = solve_grid(alexander, ALEXANDER_GRID)
        psi0 = solution.amplitudes()[:, :, 0]
        expected = psi0 @ psi0.T
        np.testing.assert_allclose(solution.reduced_density(1e9), expected / np.trace(expected), atol=1e-8)

    def test_grid_support_and_refinement(self, alexander):
        assert check_support(solve_grid(alexander, ALEXANDER_GRID), BETA_30K)
        assert not check_support(solve_grid(alexander, GridSpec([5.0], [9.0], [41])), BETA_30K)
        assert grid_refinement_delta(alexander, BETA_30K, ALEXANDER_GRID) < 1e-8


class TestFiniteM:
    def test_single_bead_matches_direct_integral(self, alexander):
        expected = _direct_single_bead(alexander, BETA_30K, ALEXANDER_GRID)
        assert_close_relative(finite_m_quadrature(alexander, BETA_30K, 1, ALEXANDER_GRID), expected, 1e-12)

    def test_result_is_a_normalized_symmetric_matrix(self, alexander):
        rho = finite_m_quadrature(alexander, BETA_30K, 2, ALEXANDER_GRID)
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_array_equal(rho, rho.T)

    def test_error_decays_with_bead_count(self, alexander):
        exact = exact_reduced_density(alexander, BETA_30K, ALEXANDER_GRID)
        errors = [
            np.max(np.abs(finite_m_quadrature(alexander, BETA_30K, m, ALEXANDER_GRID) - exact)) for m in (1, 2, 4)
        ]
        assert errors[0] > errors[1] > errors[2]

    def test_invalid_bead_count(self, alexander):
        with pytest.raises(ValueError):
            finite_m_quadrature(alexander, BETA_30K, 0, ALEXANDER_GRID)
