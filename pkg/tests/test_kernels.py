import logging
import math

import numpy as np
import pytest

from core.errors import DomainError, QuadratureError, StabilityError
from core.grid import DensityField, Grid1D, WaveFunction
from core.report import ExperimentReport
from propagators.kernels import (
    chapman_kolmogorov_residual,
    ck_damping_sweep,
    continued_heat_kernel,
    damped_kernel_integral,
    diffusion_residual,
    fokker_planck_step,
    free_schrodinger_residual,
    heat_kernel,
    kernel_table,
    multi_slice_deviation,
    multi_slice_kernel,
    propagate_density,
    propagate_wavefunction,
    quantum_kernel,
    relax_fokker_planck,
)
from propagators.quadrature import quantum_quadrature_grid


def test_heat_kernel_closed_form():
    assert heat_kernel(0.0, 1.0, 0.5) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-12)
    assert heat_kernel(1.3, 0.7, 0.5) == heat_kernel(-1.3, 0.7, 0.5)


def test_heat_kernel_integrates_to_one():
    grid = Grid1D.spanning(-12.0, 12.0, 0.01)
    assert grid.integrate(heat_kernel(grid.points, 1.0, 0.5)) == pytest.approx(1.0, abs=1e-9)


def test_heat_kernel_scaling():
    c = 1.7
    x = np.linspace(-3, 3, 13)
    assert np.allclose(c * heat_kernel(c * x, 1.0, c ** 2 * 0.5), heat_kernel(x, 1.0, 0.5), atol=1e-14)


@pytest.mark.parametrize("tau,D", [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0)])
def test_heat_kernel_rejects_bad_arguments(tau, D):
    with pytest.raises(DomainError):
        heat_kernel(0.0, tau, D)


def test_quantum_kernel_value_and_modulus(natural):
    assert complex(quantum_kernel(0.0, 1.0, natural)) == pytest.approx(0.28209479 - 0.28209479j, abs=1e-8)
    x = np.linspace(-10, 10, 101)
    assert np.allclose(np.abs(quantum_kernel(x, 2.0, natural)), math.sqrt(1.0 / (4.0 * math.pi)))
    with pytest.raises(DomainError):
        quantum_kernel(0.0, 0.0, natural)


@pytest.mark.parametrize("convention", ["plus", "minus"])
def test_quantum_kernel_is_continued_heat_kernel(natural, convention):
    x = np.linspace(-5, 5, 41)
    assert np.allclose(continued_heat_kernel(x, 0.8, natural, convention),
                       quantum_kernel(x, 0.8, natural, convention), rtol=0.0, atol=1e-12)


def test_minus_convention_is_complex_conjugate(natural):
    x = np.linspace(-3, 3, 7)
    assert np.allclose(quantum_kernel(x, 1.0, natural, "minus"), np.conj(quantum_kernel(x, 1.0, natural, "plus")))


def test_damped_kernel_integral_extrapolates_to_one(natural):
    values, extrapolated = damped_kernel_integral(1.0, natural)
    assert values[0] == pytest.approx(1.0 / np.sqrt(1.0 + 2j * 1e-2), abs=1e-8)
    assert abs(extrapolated - 1.0) < 1e-3


def test_heat_chapman_kolmogorov(natural):
    grid = Grid1D.spanning(-15.0, 15.0, 0.05)
    assert chapman_kolmogorov_residual("heat", 1.0, 0.5, grid, constants=natural) < 1e-8
    for split in (0.25, 0.75):
        assert chapman_kolmogorov_residual("heat", 1.0, split, grid, constants=natural) < 1e-8


def test_heat_chapman_kolmogorov_split_symmetry(natural):
    grid = Grid1D.spanning(-15.0, 15.0, 0.05)
    a = chapman_kolmogorov_residual("heat", 1.0, 0.3, grid, constants=natural)
    b = chapman_kolmogorov_residual("heat", 1.0, 0.7, grid, constants=natural)
    assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("split", [0.25, 0.5, 0.75])
def test_quantum_chapman_kolmogorov_sweep(natural, split):
    sweep = ck_damping_sweep(1.0, split, natural, dampings=(1e-2, 3e-3, 1e-3))
    assert list(sweep.columns) == ["damping", "residual"]
    residuals = sweep["residual"].to_numpy()
    assert np.all(np.diff(residuals) < 0)
    assert residuals[-1] < 1e-3


def test_quantum_chapman_kolmogorov_needs_damping(natural):
    with pytest.raises(QuadratureError):
        chapman_kolmogorov_residual("quantum", 1.0, 0.5, None, 0.0, natural)


def test_bad_split_rejected(natural):
    with pytest.raises(DomainError):
        chapman_kolmogorov_residual("heat", 1.0, 1.0, Grid1D.spanning(-5, 5, 0.1), constants=natural)


def test_single_slice_is_direct_kernel(natural):
    grid = Grid1D.symmetric(10.0, 0.05)
    composed = multi_slice_kernel("heat", 1.0, 1, grid, constants=natural)
    direct = kernel_table("heat", 1.0, grid, natural)
    assert np.array_equal(composed.values, direct.values)


def test_heat_multi_slice(natural):
    grid = Grid1D.symmetric(15.0, 0.05)
    assert multi_slice_deviation("heat", 1.0, 4, grid, constants=natural) < 1e-7


def test_quantum_multi_slice(natural):
    grid = quantum_quadrature_grid(natural.mass / (2.0 * natural.hbar * 0.25), 1e-3)
    assert multi_slice_deviation("quantum", 1.0, 4, grid, 1e-3, natural) < 5e-3


def test_multi_slice_needs_symmetric_grid(natural):
    with pytest.raises(DomainError):
        multi_slice_kernel("heat", 1.0, 2, Grid1D.spanning(-5.0, 6.0, 0.1), constants=natural)


def test_multi_slice_rejects_unresolved_quantum_grid(natural):
    with pytest.raises(QuadratureError):
        multi_slice_kernel("quantum", 1.0, 4, Grid1D.symmetric(20.0, 0.1), 1e-3, natural)


def test_kernel_table_frame_columns(natural):
    frame = kernel_table("heat", 1.0, Grid1D.symmetric(5.0, 0.1), natural).to_frame()
    assert list(frame.columns) == ["displacement", "re", "im"]
    assert np.all(np.diff(frame["displacement"]) > 0)
    assert np.all(frame["im"] == 0.0)


# Density propagation

@pytest.fixture
def wide_grid():
    return Grid1D.spanning(-20.0, 20.0, 0.05)


def test_propagate_gaussian_density(wide_grid):
    w0 = DensityField.gaussian(wide_grid, sigma=1.0)
    w1 = propagate_density(w0, 1.0, 0.5)
    assert w1.mass() == pytest.approx(1.0, abs=1e-8)
    assert w1.variance() == pytest.approx(2.0, abs=1e-6)
    assert w1.values.min() >= -1e-12


def test_propagate_density_semigroup(wide_grid):
    w0 = DensityField.gaussian(wide_grid, sigma=1.0, center=0.5)
    once = propagate_density(w0, 1.0, 0.5)
    twice = propagate_density(propagate_density(w0, 0.5, 0.5), 0.5, 0.5)
    assert np.max(np.abs(once.values - twice.values)) < 1e-8


def test_spike_spreads_into_heat_kernel():
    grid = Grid1D.symmetric(15.0, 0.05)
    spike = np.zeros(grid.n_points)
    spike[grid.n_points // 2] = 1.0 / grid.dx
    w = propagate_density(DensityField(grid, spike), 1.0, 0.5)
    assert np.allclose(w.values, heat_kernel(grid.points, 1.0, 0.5), atol=1e-10)


def test_density_obeys_diffusion_equation(wide_grid):
    w0 = DensityField.gaussian(wide_grid, sigma=1.0)
    dt = 0.01
    snapshots = [propagate_density(w0, t, 0.5) for t in (1.0 - dt, 1.0, 1.0 + dt)]
    assert diffusion_residual(*snapshots, dt, 0.5) < 1e-4


def test_leakage_is_logged(caplog):
    narrow = Grid1D.spanning(-3.0, 3.0, 0.05)
    with caplog.at_level(logging.WARNING, logger="propagators.kernels"):
        propagate_density(DensityField.gaussian(narrow, sigma=1.0), 1.0, 0.5)
    assert any("leaks" in record.message for record in caplog.records)


def test_density_leakage_is_flagged_in_report():
    narrow = Grid1D.spanning(-3.0, 3.0, 0.05)
    report = ExperimentReport("kernels")
    propagate_density(DensityField.gaussian(narrow, sigma=1.0), 1.0, 0.5, report=report)
    assert len(report.warnings) == 1
    assert "leaks" in report.warnings[0]


def test_contained_density_raises_no_flag(line_grid):
    report = ExperimentReport("kernels")
    propagate_density(DensityField.gaussian(line_grid, sigma=1.0), 1.0, 0.5, report=report)
    assert report.warnings == []


def test_wavefunction_leakage_is_flagged_in_report(natural):
    narrow = Grid1D.spanning(-3.0, 3.0, 0.05)
    report = ExperimentReport("kernels")
    propagate_wavefunction(WaveFunction.gaussian(narrow, sigma=1.0), 1.0, natural, report=report)
    assert len(report.warnings) == 1
    assert "norm" in report.warnings[0]


# Wavefunction propagation

def test_free_packet_spreading_direct(natural):
    grid = Grid1D.spanning(-8.0, 8.0, 0.05)
    psi = propagate_wavefunction(WaveFunction.gaussian(grid, sigma=1.0), 1.0, natural)
    assert psi.norm() == pytest.approx(1.0, abs=1e-6)
    assert psi.variance() == pytest.approx(1.25, rel=1e-3)


def test_free_packet_spreading_stencil(natural, packet):
    psi = propagate_wavefunction(packet, 1.0, natural)
    assert psi.norm() == pytest.approx(1.0, abs=1e-5)
    assert psi.variance() == pytest.approx(1.25, rel=1e-3)


def test_short_time_limit_is_identity(natural, packet):
    psi = propagate_wavefunction(packet, 1e-4, natural)
    assert np.max(np.abs(psi.values - packet.values)) < 1e-4


def test_free_packet_obeys_schrodinger(natural):
    grid = Grid1D.spanning(-8.0, 8.0, 0.05)
    psi0 = WaveFunction.gaussian(grid, sigma=1.0)
    dt = 0.01
    snapshots = [propagate_wavefunction(psi0, t, natural) for t in (1.0 - dt, 1.0, 1.0 + dt)]
    assert free_schrodinger_residual(*snapshots, dt, natural) < 1e-3


# Fokker-Planck

@pytest.fixture
def fp_grid():
    return Grid1D.spanning(-10.0, 10.0, 0.05)


def test_constant_drift_moves_centroid(fp_grid):
    w0 = DensityField.gaussian(fp_grid, sigma=1.0)
    dt = 5e-4
    w1 = fokker_planck_step(w0, np.ones(fp_grid.n_points), 0.5, dt)
    assert w1.mass() == pytest.approx(w0.mass(), abs=1e-10)
    assert w1.mean() - w0.mean() == pytest.approx(dt, abs=1e-8)


def test_unstable_step_is_rejected(fp_grid):
    w0 = DensityField.gaussian(fp_grid, sigma=1.0)
    with pytest.raises(StabilityError, match="need dt"):
        fokker_planck_step(w0, 0.0, 0.5, 2e-3)
    with pytest.raises(ValueError):
        fokker_planck_step(w0, 0.0, 0.5, 2e-3)


def test_high_peclet_step_is_rejected():
    grid = Grid1D(-5.0, 5.0, 201)
    w0 = DensityField.gaussian(grid, sigma=0.1)
    D = 0.5
    dt = grid.dx ** 2 / (4.0 * D)
    with pytest.raises(StabilityError, match="Peclet") as excinfo:
        fokker_planck_step(w0, 50.0, D, dt)
    assert "need dx <= 0.02" in str(excinfo.value)


def test_step_stays_nonnegative_below_peclet_limit():
    grid = Grid1D(-5.0, 5.0, 201)
    w0 = DensityField.gaussian(grid, sigma=0.1)
    D = 0.5
    w = relax_fokker_planck(w0, 10.0, D, grid.dx ** 2 / (4.0 * D), 20)
    assert w.values.min() >= 0.0
    assert w.mass() == pytest.approx(w0.mass(), abs=1e-12)


def test_drift_free_matches_heat_propagation(fp_grid):
    w0 = DensityField.gaussian(fp_grid, sigma=1.0)
    relaxed = relax_fokker_planck(w0, 0.0, 0.5, 1e-3, 500)
    exact = propagate_density(w0, 0.5, 0.5)
    assert np.max(np.abs(relaxed.values - exact.values)) < 1e-4


def test_ornstein_uhlenbeck_stationary_width():
    grid = Grid1D.spanning(-6.0, 6.0, 0.05)
    k, D = 1.0, 0.5
    w = relax_fokker_planck(DensityField.gaussian(grid, sigma=1.0, center=0.5), -k * grid.points, D, 1e-3, 5000)
    assert w.mass() == pytest.approx(1.0, abs=1e-9)
    assert w.variance() == pytest.approx(D / k, rel=1e-2)
    assert abs(w.mean()) < 1e-2
