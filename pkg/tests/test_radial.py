import math

import numpy as np
import pytest

from core.errors import BracketError, DomainError
from core.potentials import PotentialSpec
from quasiclassical.radial import (
    RadialProblem,
    cylindrical_to_radial,
    numerov_eigensolve,
    numerov_eigensolve_1d,
    radial_moments,
    radial_momentum_floor,
    radial_to_cylindrical,
    radial_wavefunction,
    separation_check,
    solve_spectrum,
    spectrum_frame,
    spherical_to_cylindrical_map,
)
from core.grid import Grid1D

HARMONIC = PotentialSpec.harmonic()
COULOMB = PotentialSpec.coulomb()


@pytest.fixture(scope="module")
def hydrogen_1s():
    return numerov_eigensolve(RadialProblem("spherical", 0, COULOMB), 0)


@pytest.mark.parametrize("n_radial,expected", [(0, -0.5), (1, -0.125)])
def test_hydrogen_s_levels(n_radial, expected):
    solution = numerov_eigensolve(RadialProblem("spherical", 0, COULOMB), n_radial)
    assert solution.energy == pytest.approx(expected, abs=1e-8)
    assert solution.node_count == n_radial


def test_hydrogen_2p():
    solution = numerov_eigensolve(RadialProblem("spherical", 1, COULOMB), 0)
    assert solution.energy == pytest.approx(-0.125, abs=1e-8)


def test_harmonic_3d_ground_state():
    solution = numerov_eigensolve(RadialProblem("spherical", 0, HARMONIC), 0)
    assert solution.energy == pytest.approx(1.5, abs=1e-8)
    assert solution.boundary_value < 1e-8


def test_harmonic_2d_integer_convention():
    problem = RadialProblem("cylindrical", 0, HARMONIC, convention="integer")
    assert problem.azimuthal_index == 0.0
    assert numerov_eigensolve(problem, 0).energy == pytest.approx(1.0, abs=1e-8)


def test_harmonic_2d_half_integer_convention_matches_3d():
    problem = RadialProblem("cylindrical", 0, HARMONIC)
    assert problem.azimuthal_index == 0.5
    assert numerov_eigensolve(problem, 0).energy == pytest.approx(1.5, abs=1e-8)


def test_levels_increase_with_node_count():
    problem = RadialProblem("spherical", 0, HARMONIC)
    energies = [s.energy for s in solve_spectrum(problem, range(4))]
    assert np.all(np.diff(energies) > 0)
    assert energies == pytest.approx([1.5, 3.5, 5.5, 7.5], abs=1e-7)


def test_spectrum_frame_columns():
    problem = RadialProblem("spherical", 1, HARMONIC)
    frame = spectrum_frame(solve_spectrum(problem, [0, 1]))
    assert list(frame.columns) == ["geometry", "convention", "potential", "l", "n_radial", "energy", "residual"]
    assert frame["energy"].tolist() == pytest.approx([2.5, 4.5], abs=1e-7)


def test_fourth_order_convergence():
    errors = []
    for n_points in (101, 201, 401):
        problem = RadialProblem("spherical", 0, HARMONIC, r_max=10.0, n_points=n_points)
        errors.append(abs(numerov_eigensolve(problem, 0).energy - 1.5))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert min(orders) >= 3.9


def test_free_potential_has_no_bound_state():
    problem = RadialProblem("spherical", 0, PotentialSpec.free(), r_max=20.0, n_points=2001)
    with pytest.raises(BracketError):
        numerov_eigensolve(problem, 0)


def test_problem_validation():
    with pytest.raises(DomainError):
        RadialProblem("toroidal", 0, HARMONIC)
    with pytest.raises(DomainError):
        RadialProblem("spherical", -1, HARMONIC)
    with pytest.raises(DomainError):
        numerov_eigensolve(RadialProblem("spherical", 0, HARMONIC), -1)


def test_spherical_to_cylindrical_map(hydrogen_1s):
    mapped = spherical_to_cylindrical_map(hydrogen_1s)
    assert mapped.residual < 1e-6
    back = cylindrical_to_radial(mapped.rho, mapped.phi)
    assert np.allclose(back[1:], hydrogen_1s.radial_function[1:], rtol=1e-12, atol=1e-14)


def test_map_of_zero_is_zero():
    r = np.linspace(0.0, 1.0, 11)
    assert np.all(radial_to_cylindrical(r, np.zeros_like(r)) == 0.0)


def test_separation_half_integer_index():
    solution = numerov_eigensolve(RadialProblem("cylindrical", 1, HARMONIC), 0)
    good = separation_check(solution)
    bad = separation_check(solution, azimuthal_index=1.0)
    assert good.residual < 1e-6
    assert bad.residual > 100 * good.residual


def test_separation_axial_shift():
    solution = numerov_eigensolve(RadialProblem("cylindrical", 0, HARMONIC), 0)
    result = separation_check(solution, k_z=1.0)
    assert result.total_energy == pytest.approx(solution.energy + 0.5)
    assert result.residual < 1e-6


def test_momentum_floor():
    assert radial_momentum_floor(1.0) == pytest.approx(0.25)
    assert radial_momentum_floor(4.0) * 4.0 == pytest.approx(radial_momentum_floor(1.0))
    with pytest.raises(DomainError):
        radial_momentum_floor(0.0)


def test_hydrogen_radial_moments(hydrogen_1s):
    moments = radial_moments(hydrogen_1s)
    assert moments.mean_r == pytest.approx(1.5, abs=1e-5)
    assert moments.delta_r_sq == pytest.approx(0.75, abs=1e-5)
    assert moments.delta_p_sq == pytest.approx(1.0, abs=1e-4)
    assert moments.delta_p_sq > radial_momentum_floor(moments.delta_r_sq)


def test_radial_wavefunction_is_odd_and_normalized(hydrogen_1s):
    psi = radial_wavefunction(hydrogen_1s)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(psi.values, -psi.values[::-1])


def test_line_harmonic_levels():
    grid = Grid1D.spanning(-10.0, 10.0, 0.01)
    for n in range(3):
        state = numerov_eigensolve_1d(HARMONIC, grid, n)
        assert state.energy == pytest.approx(n + 0.5, abs=1e-7)
        assert state.node_count == n
