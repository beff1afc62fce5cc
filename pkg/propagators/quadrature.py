"""
Quadrature helpers for oscillatory short-time kernels

The real-time kernel exp(i m eta^2 / 2 hbar eps) oscillates faster than most
grids can resolve, so the eta-integral is done on a finer sub-grid with a smooth
taper at the edge of the integration range.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from core.constants import PhysicsConstants, phase_sign
from core.errors import DomainError
from core.grid import Grid1D

logger = logging.getLogger(__name__)

RANGE_IN_LENGTHS = 10.0
# damping level whose Gaussian weight e^{-delta x^2} drops to e^{-36} at the grid edge
DAMPING_EDGE_EXPONENT = 36.0


@dataclass(frozen=True)
class ShortTimeStencil:
    """Normalized eta-weights of the short-time kernel on a sub-grid of the field grid.

    Attributes:
        eta: offsets j*h for j = -half..half
        weights: complex weights, summing to exactly 1
        sub: field spacing dx divided by the sub-grid spacing h
        half: number of sub-grid offsets on each side
        epsilon: time step the stencil was built for
        raw_sum: eta-integral of the tapered kernel phase before the weights are rescaled
    """
    eta: np.ndarray
    weights: np.ndarray
    sub: int
    half: int
    epsilon: float
    raw_sum: complex = 1.0 + 0.0j

    @property
    def h(self) -> float:
        return float(self.eta[1] - self.eta[0]) if self.eta.size > 1 else 0.0

    def gather(self, grid: Grid1D, values: np.ndarray) -> np.ndarray:
        """psi(x_i + eta_j) as an (n_points, 2*half+1) array, zero outside the grid."""
        values = np.asarray(values, dtype=complex)
        n = grid.n_points
        x = grid.points
        fine_x = grid.x_min + self.h * np.arange((n - 1) * self.sub + 1)
        if self.sub == 1:
            inner = values
        else:
            spline = CubicSpline(x, np.column_stack([values.real, values.imag]))
            parts = spline(fine_x)
            inner = parts[:, 0] + 1j * parts[:, 1]
            inner[::self.sub] = values
        fine = np.concatenate([np.zeros(self.half, dtype=complex), inner, np.zeros(self.half, dtype=complex)])
        windows = sliding_window_view(fine, 2 * self.half + 1)[::self.sub]
        return windows[:n]

    def midpoints(self, grid: Grid1D) -> np.ndarray:
        """x_i + eta_j / 2 for every grid point and offset."""
        return grid.points[:, None] + 0.5 * self.eta[None, :]

    def apply(self, grid: Grid1D, values: np.ndarray, factor: Optional[np.ndarray] = None) -> np.ndarray:
        """Sum_j w_j * factor[i, j] * psi(x_i + eta_j)."""
        windows = self.gather(grid, values)
        if factor is None:
            return windows @ self.weights
        return np.einsum("ij,j->i", windows * factor, self.weights)


def taper(xi: np.ndarray, range_in_lengths: float = RANGE_IN_LENGTHS) -> np.ndarray:
    """Smooth window in the phase variable xi^2/2; ~1 in the middle, ~1e-6 at the range edge."""
    centre = range_in_lengths ** 2 / 4.0
    spread = range_in_lengths ** 2 / 14.0
    return 0.5 * erfc((0.5 * xi ** 2 - centre) / spread)


def short_time_stencil(dx: float, epsilon: float, constants: PhysicsConstants,
                       damping: float = 0.0, convention: str = "plus",
                       range_in_lengths: float = RANGE_IN_LENGTHS) -> ShortTimeStencil:
    """Build the tapered eta-quadrature for one time step.

    Args:
        dx: spacing of the field grid
        epsilon: time step (> 0)
        constants: hbar and mass
        damping: optional Gaussian damping e^{-damping * eta^2}
        convention: kernel phase convention, 'plus' or 'minus'

    Returns:
        ShortTimeStencil whose weights sum to 1
    """
    if not epsilon > 0:
        raise DomainError(f"time step must be positive, got {epsilon}")
    if damping < 0:
        raise DomainError(f"damping must be >= 0, got {damping}")
    sign = phase_sign(convention)
    length = math.sqrt(constants.hbar * epsilon / constants.mass)
    h_target = math.pi * length / (2.0 * range_in_lengths)
    sub = max(1, math.ceil(dx / h_target))
    h = dx / sub
    half = max(1, math.ceil(range_in_lengths * length / h))
    eta = h * np.arange(-half, half + 1)
    xi = eta / length
    raw = taper(xi, range_in_lengths) * np.exp(sign * 0.5j * xi ** 2)
    if damping > 0:
        raw = raw * np.exp(-damping * eta ** 2)
    weights = raw / raw.sum()
    logger.debug(f"short-time stencil: eps={epsilon:g} sub={sub} half={half} h={h:.4g}")
    return ShortTimeStencil(eta=eta, weights=weights, sub=sub, half=half, epsilon=epsilon,
                            raw_sum=complex(raw.sum() * h))


def quantum_quadrature_grid(chirp: float, damping: float) -> Grid1D:
    """Symmetric grid for integrating exp(i*chirp*x^2 - damping*x^2) over the real line.

    Extends until the damping weight is e^{-36}; spacing keeps the phase step below
    pi/2 at the edge.
    """
    if not damping > 0:
        raise DomainError("oscillatory quadrature needs damping > 0")
    half_width = math.sqrt(DAMPING_EDGE_EXPONENT / damping)
    dx = math.pi / (4.0 * abs(chirp) * half_width)
    return Grid1D.symmetric(half_width, dx)


def richardson_extrapolate(dampings, values) -> complex:
    """Polynomial fit in the damping parameter, evaluated at zero damping."""
    dampings = np.asarray(dampings, dtype=float)
    values = np.asarray(values, dtype=complex)
    if dampings.size < 2:
        return complex(values[0])
    degree = dampings.size - 1
    real = np.polynomial.polynomial.polyfit(dampings, values.real, degree)
    imag = np.polynomial.polynomial.polyfit(dampings, values.imag, degree)
    return complex(real[0], imag[0])
