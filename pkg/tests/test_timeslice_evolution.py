import math

import numpy as np
import pytest

from core.errors import DomainError, NormDriftError
from core.grid import Grid1D, WaveFunction
from core.potentials import PotentialSpec
from propagators.kernels import propagate_wavefunction
from propagators.quadrature import short_time_stencil
from propagators.timeslice_evolution import (
    EvolutionConfig,
    convergence_sweep,
    evolve,
    global_error,
    potential_mode_difference,
    schrodinger_residual,
    short_time_step,
    spectral_reference_evolve,
    stencil_normalization_error,
    transmitted_probability,
)
from stochastic.stochastic_paths import fit_loglog_slope

FREE = PotentialSpec.free()
HARMONIC = PotentialSpec.harmonic(1.0)


def free_packet(grid, t, sigma=1.0):
    """Analytic free Gaussian packet at time t (hbar = m = 1)."""
    spread = 1.0 + 1j * t / (2.0 * sigma ** 2)
    x = grid.points
    values = (2.0 * math.pi * sigma ** 2) ** -0.25 / np.sqrt(spread) * np.exp(-x ** 2 / (4.0 * sigma ** 2 * spread))
    return WaveFunction(grid, values)


def ground_state(grid, shift=0.0):
    return WaveFunction(grid, math.pi ** -0.25 * np.exp(-(grid.points - shift) ** 2 / 2.0))


def test_normalization_constant():
    config = EvolutionConfig(0.01, 1)
    assert config.normalization == pytest.approx(np.sqrt(2j * math.pi * 0.01))
    assert config.normalization ** 2 == pytest.approx(2j * math.pi * 0.01)
    assert EvolutionConfig(0.01, 1, convention="minus").normalization == pytest.approx(np.conj(config.normalization))
    assert EvolutionConfig(0.01, 250).total_time == pytest.approx(2.5)


@pytest.mark.parametrize("convention", ["plus", "minus"])
@pytest.mark.parametrize("epsilon", [0.01, 0.05])
def test_stencil_integral_matches_normalization(line_grid, natural, convention, epsilon):
    config = EvolutionConfig(epsilon, 1, convention=convention)
    stencil = short_time_stencil(line_grid.dx, epsilon, natural, convention=convention)
    assert stencil_normalization_error(stencil, config) < 1e-5


def test_evolve_reports_normalization_error(packet):
    result = evolve(packet, EvolutionConfig(0.01, 3), FREE)
    assert result.normalization_error < 1e-5
    damped = evolve(packet, EvolutionConfig(0.01, 3, damping=1e-3), FREE)
    assert damped.normalization_error == 0.0


def test_config_validation():
    with pytest.raises(DomainError):
        EvolutionConfig(0.0, 1)
    with pytest.raises(DomainError):
        EvolutionConfig(0.01, 1, potential_mode="taylor")
    with pytest.raises(DomainError):
        EvolutionConfig(0.01, 1, convention="sideways")


def test_free_step_matches_analytic(packet):
    psi = short_time_step(packet, EvolutionConfig(0.01, 1), FREE)
    assert np.max(np.abs(psi.values - free_packet(packet.grid, 0.01).values)) < 5e-6


def test_free_step_matches_kernel_propagation(packet, natural):
    psi = short_time_step(packet, EvolutionConfig(0.01, 1), FREE)
    direct = propagate_wavefunction(packet, 0.01, natural)
    assert np.max(np.abs(psi.values - direct.values)) < 1e-6


def test_zero_steps_is_identity(packet):
    result = evolve(packet, EvolutionConfig(0.01, 0), HARMONIC)
    assert len(result.snapshots) == 1
    assert np.array_equal(result.final.values, packet.values)
    assert np.array_equal(spectral_reference_evolve(packet, EvolutionConfig(0.01, 0), HARMONIC).values,
                          packet.values)


def test_free_spreading(packet):
    result = evolve(packet, EvolutionConfig(0.01, 100), FREE)
    assert result.times[-1] == pytest.approx(1.0)
    assert result.final.variance() == pytest.approx(1.25, rel=1e-3)


def test_free_steps_are_unitary(packet):
    result = evolve(packet, EvolutionConfig(0.01, 50), FREE)
    assert np.max(result.norm_drift) < 1e-6


def test_harmonic_ground_state_is_stationary(line_grid):
    psi0 = ground_state(line_grid)
    result = evolve(psi0, EvolutionConfig(0.01, 100, renormalize=True), HARMONIC)
    assert np.max(np.abs(np.abs(result.final.values) - np.abs(psi0.values))) < 1e-3


def test_harmonic_midpoint_rule_norm_loss(line_grid):
    result = evolve(ground_state(line_grid), EvolutionConfig(0.01, 20), HARMONIC)
    # midpoint potential loses about eps^2 <U''> / 8 of amplitude per step
    assert np.allclose(result.norm_drift, 0.01 ** 2 / 8.0, rtol=0.1)


def test_expanded_mode_precondition(line_grid):
    barrier = PotentialSpec.barrier(4.25, 1.0, edge=0.25)
    with pytest.raises(DomainError, match="use eps"):
        short_time_step(ground_state(line_grid), EvolutionConfig(0.05, 1, "expanded_first_order"), barrier)


def test_expanded_and_full_modes_differ_at_second_order(line_grid):
    barrier = PotentialSpec.barrier(4.25, 1.0, edge=0.25)
    psi = WaveFunction.gaussian(line_grid, sigma=1.0)
    epsilons = [0.02, 0.01, 0.005]
    diffs = [potential_mode_difference(psi, eps, barrier) for eps in epsilons]
    assert fit_loglog_slope(epsilons, diffs) >= 1.9
    u_max = barrier.max_abs_on(line_grid.points)
    for eps, diff in zip(epsilons, diffs):
        assert diff <= 1.05 * (eps * u_max) ** 2 / 2.0


def test_barrier_transmission_matches_spectral(line_grid):
    barrier = PotentialSpec.barrier(4.25, 2.0, edge=0.5)
    psi0 = WaveFunction.gaussian(line_grid, sigma=1.0, center=-5.0, wavenumber=2.0)
    config = EvolutionConfig(0.005, 1000)
    stepped = evolve(psi0, config, barrier).final
    reference = spectral_reference_evolve(psi0, config, barrier)
    assert abs(transmitted_probability(stepped, 2.0) - transmitted_probability(reference, 2.0)) < 1e-2
    assert transmitted_probability(reference, 0.0) < 0.5


def test_norm_drift_aborts(line_grid):
    steep = PotentialSpec.harmonic(400.0)
    with pytest.raises(NormDriftError):
        evolve(ground_state(line_grid), EvolutionConfig(0.02, 200), steep)


def test_free_evolution_obeys_schrodinger(packet):
    result = evolve(packet, EvolutionConfig(0.01, 20), FREE)
    assert schrodinger_residual(result.snapshots, FREE, 0.01) < 1e-3


def test_stationary_state_residual_is_second_order():
    residuals, spacings = [], [0.1, 0.05, 0.025]
    dt = 1e-3
    for dx in spacings:
        grid = Grid1D.spanning(-10.0, 10.0, dx)
        phi = ground_state(grid).values
        snapshots = [WaveFunction(grid, phi * np.exp(-0.5j * k * dt)) for k in range(3)]
        residuals.append(schrodinger_residual(snapshots, HARMONIC, dt))
    assert 1.8 <= fit_loglog_slope(spacings, residuals) <= 2.2


def test_residual_detects_corruption():
    grid = Grid1D.spanning(-10.0, 10.0, 0.05)
    phi = ground_state(grid).values
    snapshots = [WaveFunction(grid, phi * np.exp(-0.5j * k * 0.01)) for k in range(3)]
    baseline = schrodinger_residual(snapshots, HARMONIC, 0.01)
    corrupted = snapshots[1].values.copy()
    corrupted[grid.n_points // 2] *= 1.1
    snapshots[1] = WaveFunction(grid, corrupted)
    assert schrodinger_residual(snapshots, HARMONIC, 0.01) > 10.0 * baseline


def test_residual_needs_three_snapshots(packet):
    with pytest.raises(DomainError):
        schrodinger_residual([packet, packet], FREE, 0.01)


def test_spectral_reference_free_packet(packet):
    psi = spectral_reference_evolve(packet, EvolutionConfig(0.01, 100), FREE)
    assert np.max(np.abs(psi.values - free_packet(packet.grid, 1.0).values)) < 1e-6


def test_spectral_reference_agrees_on_harmonic(line_grid):
    psi0 = ground_state(line_grid, shift=1.0)
    config = EvolutionConfig(0.01, 100, renormalize=True)
    stepped = evolve(psi0, config, HARMONIC).final
    reference = spectral_reference_evolve(psi0, config, HARMONIC)
    assert np.max(np.abs(stepped.density - reference.density)) < 1e-3


def test_convergence_order():
    grid = Grid1D.spanning(-10.0, 10.0, 0.05)
    frame = convergence_sweep(ground_state(grid, shift=1.0), HARMONIC, [0.04, 0.02, 0.01], 1.0)
    assert fit_loglog_slope(frame["eps"], frame["global_error"]) >= 0.9


def test_grid_refinement_is_consistent():
    widths = []
    for dx in (0.1, 0.05):
        grid = Grid1D.spanning(-20.0, 20.0, dx)
        psi = evolve(WaveFunction.gaussian(grid, sigma=1.0), EvolutionConfig(0.02, 50), FREE).final
        widths.append(psi.variance())
    assert abs(widths[0] - widths[1]) < 4.0 * 0.1 ** 2


def test_snapshot_frame_columns(packet):
    frame = evolve(packet, EvolutionConfig(0.01, 2), FREE).snapshot_frame()
    assert list(frame.columns) == ["x", "re", "im", "density"]


def test_global_error_is_zero_for_identical_states(packet):
    assert global_error(packet, packet) == 0.0
