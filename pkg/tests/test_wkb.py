import math

import numpy as np
import pytest

from core.errors import DomainError
from core.grid import Grid1D, WaveFunction
from core.potentials import PotentialSpec
from quasiclassical.radial import RadialProblem, numerov_eigensolve, numerov_eigensolve_1d, radial_wavefunction
from quasiclassical.wkb import (
    action_integrals,
    amplitude_factor,
    classical_density,
    energy_decomposition_check,
    find_turning_points,
    fit_matching,
    forbidden_log_derivative,
    local_average,
    local_momentum,
    potential_mean,
    wkb_comparison,
    wkb_wavefunction,
)

HARMONIC = PotentialSpec.harmonic()


def _harmonic_state(n, half_width=10.0, dx=0.01):
    return numerov_eigensolve_1d(HARMONIC, Grid1D.spanning(-half_width, half_width, dx), n)


def test_local_momentum_regimes():
    momentum = local_momentum(0.5, HARMONIC, np.array([0.0, 1.0, 2.0]))
    assert momentum.value == pytest.approx([1.0, 0.0, math.sqrt(3.0)])
    assert momentum.regime.tolist() == ["allowed", "allowed", "forbidden"]


def test_amplitude_factor():
    assert amplitude_factor(np.array([4.0, 0.25])) == pytest.approx([0.5, 2.0])


def test_turning_points_and_regions():
    grid = Grid1D.spanning(-3.0, 3.0, 0.05)
    turning = find_turning_points(0.5, HARMONIC, grid)
    assert turning.points == pytest.approx([-1.0, 1.0], abs=1e-12)
    assert [r.regime for r in turning.regions(HARMONIC)] == ["forbidden", "allowed", "forbidden"]


def test_action_over_allowed_interval():
    action = action_integrals(0.5, HARMONIC, (-1.0, 1.0))
    assert action.regime == "allowed"
    assert action.s_real == pytest.approx(math.pi / 2, abs=1e-10)
    assert action.x.size == 256


def test_forbidden_action_grows_with_upper_limit():
    shorter = action_integrals(0.5, HARMONIC, (1.0, 2.0))
    longer = action_integrals(0.5, HARMONIC, (1.0, 3.0))
    assert shorter.regime == "forbidden"
    assert 0 < shorter.s_real < longer.s_real
    assert action_integrals(0.5, HARMONIC, (2.0, 2.0)).s_real == 0.0


def test_action_rejects_straddled_turning_point():
    with pytest.raises(DomainError):
        action_integrals(0.5, HARMONIC, (0.0, 2.0))


def test_flat_potential_gives_plane_wave():
    grid = Grid1D.spanning(0.0, 5.0, 0.01)
    result = wkb_wavefunction(2.0, PotentialSpec.free(), grid)
    assert result.n_masked == 0
    expected = np.exp(2j * grid.points) / math.sqrt(2.0)
    assert np.allclose(result.wavefunction.values, expected, atol=1e-10)


def test_forbidden_branch_log_derivative():
    grid = Grid1D.spanning(-6.0, 6.0, 1e-3)
    result = wkb_wavefunction(0.5, HARMONIC, grid)
    x = grid.points
    inner = np.flatnonzero((x >= 4.0) & (x <= 5.0))
    log_psi = np.log(np.abs(result.wavefunction.values))
    numeric = (log_psi[inner + 1] - log_psi[inner - 1]) / (2 * grid.dx)
    assert np.allclose(numeric, forbidden_log_derivative(0.5, HARMONIC, x[inner]), atol=1e-6)


def test_matching_validation():
    grid = Grid1D.spanning(-3.0, 3.0, 0.01)
    with pytest.raises(DomainError):
        wkb_wavefunction(0.5, HARMONIC, grid, matching=[(1, 0)])
    with pytest.raises(DomainError):
        wkb_wavefunction(0.5, HARMONIC, grid, matching=[(1, 1), (1, 1), (1, 0)])


def test_turning_points_are_masked(caplog):
    grid = Grid1D.spanning(-3.0, 3.0, 0.01)
    result = wkb_wavefunction(0.5, HARMONIC, grid)
    near = np.abs(np.abs(grid.points) - 1.0) < 0.05
    assert result.masked[near].all()
    assert np.all(result.wavefunction.values[result.masked] == 0)
    assert "masked" in caplog.text


def test_harmonic_n10_matches_exact():
    state = _harmonic_state(10)
    comparison = wkb_comparison(state.energy, HARMONIC, state.wavefunction)
    assert comparison.relative_error < 0.02
    assert list(comparison.frame.columns) == ["x", "wkb_re", "wkb_im", "exact", "mask"]
    assert len(fit_matching(state.energy, HARMONIC, state.wavefunction.grid, state.wavefunction)) == 3


def test_error_falls_with_quantum_number():
    low = _harmonic_state(5)
    high = _harmonic_state(20, half_width=12.0)
    low_error = wkb_comparison(low.energy, HARMONIC, low.wavefunction).relative_error
    high_error = wkb_comparison(high.energy, HARMONIC, high.wavefunction).relative_error
    assert high_error < low_error


def test_classical_density_closed_form():
    x = np.linspace(-2.0, 2.0, 401)
    density = classical_density(0.5, HARMONIC, x)
    assert density[200] == pytest.approx(1.0 / math.pi, rel=1e-8)
    assert np.all(density[np.abs(x) > 1.0] == 0.0)


def test_local_average_of_constant():
    x = np.linspace(0.0, 10.0, 1001)
    assert np.allclose(local_average(np.full(x.size, 3.0), x, 1.0)[100:900], 3.0)


def test_quantum_density_averages_to_classical():
    state = _harmonic_state(20, half_width=12.0)
    x = state.wavefunction.grid.points
    p = local_momentum(state.energy, HARMONIC, x).value
    wavelength = np.where(p > 1.0, 2 * math.pi / np.maximum(p, 1.0), 2 * math.pi)
    averaged = local_average(state.wavefunction.density, x, wavelength)
    classical = classical_density(state.energy, HARMONIC, x)
    centre = np.abs(x) <= 0.6 * math.sqrt(2 * state.energy)
    assert np.max(np.abs(averaged[centre] - classical[centre]) / classical[centre]) < 0.05


@pytest.mark.parametrize("n", [0, 1])
def test_energy_decomposition_harmonic(n):
    state = _harmonic_state(n)
    report = energy_decomposition_check(state.wavefunction, state.energy, HARMONIC)
    assert report.passed
    assert report.residuals["energy_decomposition"] < 1e-8
    assert report.results["p_bar"].estimate == pytest.approx(0.0, abs=1e-9)
    assert report.results["potential_mean"].estimate == pytest.approx(0.5 * (n + 0.5), abs=1e-7)


def test_energy_decomposition_hydrogen():
    problem = RadialProblem("spherical", 0, PotentialSpec.coulomb(), r_max=40.0, n_points=40001)
    solution = numerov_eigensolve(problem, 0)
    psi = radial_wavefunction(solution)
    report = energy_decomposition_check(psi, solution.energy, PotentialSpec.coulomb())
    assert report.residuals["energy_decomposition"] < 1e-8
    assert report.results["potential_mean"].estimate == pytest.approx(-1.0, abs=1e-6)
    assert report.results["kinetic_fluctuation"].estimate == pytest.approx(0.5, abs=1e-6)
    assert report.passed


def test_potential_mean_across_coulomb_node():
    grid = Grid1D(-40.0, 40.0, 80001)
    x = grid.points
    psi = WaveFunction(grid, math.sqrt(2.0) * x * np.exp(-np.abs(x)))
    assert potential_mean(psi, PotentialSpec.coulomb()) == pytest.approx(-1.0, abs=1e-9)


def test_potential_mean_rejects_density_at_singularity():
    grid = Grid1D(-5.0, 5.0, 101)
    psi = WaveFunction(grid, np.exp(-grid.points ** 2))
    with pytest.raises(DomainError, match="singular"):
        potential_mean(psi, PotentialSpec.coulomb())
