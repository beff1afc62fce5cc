"""
Short-time-slice evolution of wavefunctions

Each step integrates the free short-time kernel against psi(x + eta) times a
potential factor evaluated at the midpoint x + eta/2, either as the full
exponential or expanded to first order in eps*U/hbar.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from core.constants import NATURAL_UNITS, PhysicsConstants, phase_sign
from core.errors import DomainError, NormDriftError
from core.grid import Grid1D, WaveFunction
from core.potentials import PotentialSpec
from propagators.quadrature import ShortTimeStencil, short_time_stencil

logger = logging.getLogger(__name__)

POTENTIAL_MODES = ("expanded_first_order", "full_exponential")
EXPANSION_LIMIT = 0.1
NORM_DRIFT_LIMIT = 1e-2


@dataclass(frozen=True)
class EvolutionConfig:
    """Step size, step count and how the potential factor is applied."""
    epsilon: float
    n_steps: int
    potential_mode: str = "full_exponential"
    damping: float = 0.0
    renormalize: bool = False
    convention: str = "plus"
    constants: PhysicsConstants = NATURAL_UNITS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_steps < 0:
            raise DomainError(f"n_steps must be >= 0, got {self.n_steps}")
        if self.potential_mode not in POTENTIAL_MODES:
            raise DomainError(f"potential_mode must be one of {POTENTIAL_MODES}, got {self.potential_mode!r}")
        if self.damping < 0:
            raise DomainError(f"damping must be >= 0, got {self.damping}")
        phase_sign(self.convention)

    @property
    def normalization(self) -> complex:
        """A = sqrt(2 pi i hbar eps / m) on the quantum kernel's branch (i -> -i for 'minus')."""
        c = self.constants
        sign = phase_sign(self.convention)
        return complex(np.sqrt(sign * 2j * math.pi * c.hbar * self.epsilon / c.mass))

    @property
    def total_time(self) -> float:
        return self.epsilon * self.n_steps


@dataclass
class EvolutionResult:
    """Snapshots after every step, their times and the per-step norm drift.

    normalization_error is |sum of raw stencil weights * h / A - 1| for undamped runs.
    """
    snapshots: List[WaveFunction]
    times: np.ndarray
    norm_drift: np.ndarray
    cumulative_drift: float = 0.0
    normalization_error: float = 0.0

    @property
    def final(self) -> WaveFunction:
        return self.snapshots[-1]

    def snapshot_frame(self, index: int = -1) -> pd.DataFrame:
        psi = self.snapshots[index]
        return pd.DataFrame({
            "x": psi.grid.points,
            "re": psi.values.real,
            "im": psi.values.imag,
            "density": psi.density,
        })


def check_expansion(grid: Grid1D, config: EvolutionConfig, potential: PotentialSpec) -> None:
    """Expanded mode needs max|U| eps / hbar below EXPANSION_LIMIT on the grid."""
    if config.potential_mode != "expanded_first_order":
        return
    u_max = potential.max_abs_on(grid.points)
    ratio = u_max * config.epsilon / config.constants.hbar
    if ratio >= EXPANSION_LIMIT:
        suggested = 0.5 * EXPANSION_LIMIT * config.constants.hbar / u_max
        logger.error(f"first-order expansion invalid: max|U| eps / hbar = {ratio:.3g}")
        raise DomainError(f"max|U|*eps/hbar = {ratio:.3g} >= {EXPANSION_LIMIT}; "
                          f"use eps <= {suggested:.3g} or the full_exponential mode")


def potential_factor(midpoints: np.ndarray, config: EvolutionConfig, potential: PotentialSpec) -> np.ndarray:
    """exp(-i eps U / hbar) or 1 - i eps U / hbar at the given midpoints (sign follows the convention)."""
    theta = phase_sign(config.convention) * config.epsilon * potential(midpoints) / config.constants.hbar
    if config.potential_mode == "full_exponential":
        return np.exp(-1j * theta)
    return 1.0 - 1j * theta


class _Stepper:
    """Stencil and potential factors prepared once for a grid."""

    def __init__(self, grid: Grid1D, config: EvolutionConfig, potential: PotentialSpec):
        check_expansion(grid, config, potential)
        self.grid = grid
        self.stencil: ShortTimeStencil = short_time_stencil(
            grid.dx, config.epsilon, config.constants, config.damping, config.convention)
        if potential.kind == "free":
            self.factor = None
        else:
            self.factor = potential_factor(self.stencil.midpoints(grid), config, potential)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.stencil.apply(self.grid, values, self.factor)


def stencil_normalization_error(stencil: ShortTimeStencil, config: EvolutionConfig) -> float:
    """How far the stencil's own eta-integral is from A before its weights are rescaled to sum to 1."""
    return float(abs(stencil.raw_sum / config.normalization - 1.0))


def short_time_step(psi: WaveFunction, config: EvolutionConfig, potential: PotentialSpec) -> WaveFunction:
    """Advance psi by one time slice eps."""
    stepper = _Stepper(psi.grid, config, potential)
    return WaveFunction(psi.grid, stepper(psi.values))


def evolve(psi0: WaveFunction, config: EvolutionConfig, potential: PotentialSpec) -> EvolutionResult:
    """Apply n_steps time slices, recording the norm change of every step.

    Raises NormDriftError once the accumulated drift exceeds NORM_DRIFT_LIMIT.
    """
    grid = psi0.grid
    snapshots = [psi0]
    drift = np.zeros(config.n_steps)
    cumulative = 0.0
    stencil_error = 0.0
    if config.n_steps:
        stepper = _Stepper(grid, config, potential)
        if config.damping == 0:
            stencil_error = stencil_normalization_error(stepper.stencil, config)
            logger.debug(f"stencil normalization error {stencil_error:.2e} at eps={config.epsilon:g}")
        initial_norm = psi0.norm()
        previous_norm = initial_norm
        values = psi0.values
        for step in range(config.n_steps):
            values = stepper(values)
            norm = float(np.sqrt(grid.integrate(np.abs(values) ** 2)))
            drift[step] = abs(norm / previous_norm - 1.0)
            if config.renormalize:
                cumulative += drift[step]
                values = values * (initial_norm / norm)
                norm = initial_norm
            else:
                cumulative = abs(norm / initial_norm - 1.0)
            if cumulative > NORM_DRIFT_LIMIT:
                logger.error(f"norm drift {cumulative:.3e} after step {step + 1}")
                raise NormDriftError(f"cumulative norm drift {cumulative:.3e} exceeds {NORM_DRIFT_LIMIT:g} "
                                     f"after {step + 1} of {config.n_steps} steps (eps={config.epsilon:g})")
            previous_norm = norm
            snapshots.append(WaveFunction(grid, values))
        if cumulative > 1e-4:
            logger.warning(f"accumulated norm drift {cumulative:.2e} over {config.n_steps} steps")
    times = config.epsilon * np.arange(config.n_steps + 1)
    return EvolutionResult(snapshots, times, drift, cumulative, stencil_error)


def schrodinger_residual(snapshots: Sequence[WaveFunction], potential: PotentialSpec, dt: float,
                         constants: PhysicsConstants = NATURAL_UNITS, convention: str = "plus") -> float:
    """Max over interior points and times of |i hbar dpsi/dt + (hbar^2/2m) psi'' - U psi|.

    Central differences in t and x; for the 'minus' convention the time derivative flips sign.
    """
    if len(snapshots) < 3:
        raise DomainError(f"need at least 3 snapshots, got {len(snapshots)}")
    sign = phase_sign(convention)
    grid = snapshots[0].grid
    dx = grid.dx
    u = potential(grid.points)[1:-1]
    worst = 0.0
    for k in range(1, len(snapshots) - 1):
        before, now, after = snapshots[k - 1].values, snapshots[k].values, snapshots[k + 1].values
        dpsidt = (after[1:-1] - before[1:-1]) / (2.0 * dt)
        laplacian = (now[2:] - 2.0 * now[1:-1] + now[:-2]) / dx ** 2
        residual = (sign * 1j * constants.hbar * dpsidt
                    + constants.hbar ** 2 / (2.0 * constants.mass) * laplacian - u * now[1:-1])
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def spectral_reference_evolve(psi0: WaveFunction, config: EvolutionConfig, potential: PotentialSpec) -> WaveFunction:
    """Strang split-operator evolution over the same grid.

    The FFT makes the grid periodic; keep the packet away from the edges.
    """
    grid = psi0.grid
    if config.n_steps == 0:
        return psi0
    c = config.constants
    sign = phase_sign(config.convention)
    k = 2.0 * math.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    kinetic = np.exp(-sign * 1j * c.hbar * k ** 2 * config.epsilon / (2.0 * c.mass))
    half_potential = np.exp(-sign * 0.5j * config.epsilon * potential(grid.points) / c.hbar)
    values = psi0.values * half_potential
    for step in range(config.n_steps):
        values = np.fft.ifft(kinetic * np.fft.fft(values))
        values = values * (half_potential if step == config.n_steps - 1 else half_potential ** 2)
    return WaveFunction(grid, values)


def transmitted_probability(psi: WaveFunction, x_cut: float) -> float:
    """Probability to the right of x_cut."""
    x = psi.grid.points
    return float(psi.grid.integrate(np.where(x > x_cut, psi.density, 0.0)))


def potential_mode_difference(psi: WaveFunction, epsilon: float, potential: PotentialSpec,
                              constants: PhysicsConstants = NATURAL_UNITS,
                              convention: str = "plus") -> float:
    """L2 distance between one full-exponential step and one first-order step."""
    full = short_time_step(psi, EvolutionConfig(epsilon, 1, "full_exponential", convention=convention,
                                                constants=constants), potential)
    expanded = short_time_step(psi, EvolutionConfig(epsilon, 1, "expanded_first_order", convention=convention,
                                                    constants=constants), potential)
    return float(np.sqrt(psi.grid.integrate(np.abs(full.values - expanded.values) ** 2)))


def global_error(psi: WaveFunction, reference: WaveFunction) -> float:
    """L2 distance between two wavefunctions on the same grid."""
    return float(np.sqrt(psi.grid.integrate(np.abs(psi.values - reference.values) ** 2)))


def convergence_sweep(psi0: WaveFunction, potential: PotentialSpec, epsilons: Sequence[float], total_time: float,
                      potential_mode: str = "full_exponential", constants: PhysicsConstants = NATURAL_UNITS,
                      reference_steps_per_unit: int = 2000) -> pd.DataFrame:
    """Global error at total_time against a fine split-operator reference, per eps."""
    n_ref = max(1, int(round(total_time * reference_steps_per_unit)))
    reference = spectral_reference_evolve(
        psi0, EvolutionConfig(total_time / n_ref, n_ref, constants=constants), potential)
    rows = []
    for eps in epsilons:
        n_steps = int(round(total_time / eps))
        config = EvolutionConfig(total_time / n_steps, n_steps, potential_mode, constants=constants)
        final = evolve(psi0, config, potential).final
        rows.append({"eps": config.epsilon, "global_error": global_error(final, reference)})
        logger.info(f"{potential_mode} eps={config.epsilon:g}: global error {rows[-1]['global_error']:.3e}")
    return pd.DataFrame(rows, columns=["eps", "global_error"])
