"""
Uniform 1D grids and the fields that live on them
"""

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from core.errors import DomainError

NEGATIVE_DENSITY_FLOOR = -1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [x_min, x_max] with n_points nodes."""
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise DomainError(f"grid needs at least 2 points, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise DomainError(f"grid bounds must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @classmethod
    def symmetric(cls, half_width: float, dx: float) -> "Grid1D":
        """Odd-sized grid centred on 0 with spacing as close to dx as the width allows."""
        half = int(np.ceil(half_width / dx - 1e-9))
        return cls(-half * dx, half * dx, 2 * half + 1)

    @classmethod
    def spanning(cls, x_min: float, x_max: float, dx: float) -> "Grid1D":
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min, x_min + (n - 1) * dx, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    def is_symmetric(self) -> bool:
        return self.n_points % 2 == 1 and np.isclose(self.x_min, -self.x_max, rtol=0.0, atol=1e-12 * self.width)

    def integrate(self, values: np.ndarray) -> complex:
        """Trapezoid rule on the grid."""
        return trapezoid(values, dx=self.dx)

    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.n_points, self.dx)
        weights[0] = weights[-1] = 0.5 * self.dx
        return weights


@dataclass(frozen=True)
class DensityField:
    """Probability density W on a grid."""
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise DomainError(f"density has shape {values.shape}, grid has {self.grid.n_points} points")
        if values.size and values.min() < NEGATIVE_DENSITY_FLOOR:
            raise DomainError(f"density has negative values down to {values.min():.3e}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray]) -> "DensityField":
        return cls(grid, fn(grid.points)).normalized()

    @classmethod
    def gaussian(cls, grid: Grid1D, sigma: float, center: float = 0.0) -> "DensityField":
        return cls.from_function(grid, lambda x: np.exp(-(x - center) ** 2 / (2 * sigma ** 2)))

    def mass(self) -> float:
        return float(self.grid.integrate(self.values))

    def normalized(self) -> "DensityField":
        mass = self.mass()
        if not mass > 0:
            raise DomainError("cannot normalize a density with zero mass")
        return replace(self, values=self.values / mass)

    def mean(self) -> float:
        return float(self.grid.integrate(self.grid.points * self.values) / self.mass())

    def variance(self) -> float:
        x = self.grid.points
        mean = self.mean()
        return float(self.grid.integrate((x - mean) ** 2 * self.values) / self.mass())


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes on a grid, L2-normalizable."""
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise DomainError(f"wavefunction has shape {values.shape}, grid has {self.grid.n_points} points")
        object.__setattr__(self, "values", values)

    @classmethod
    def gaussian(cls, grid: Grid1D, sigma: float, center: float = 0.0, wavenumber: float = 0.0) -> "WaveFunction":
        """Packet with |psi|^2 of standard deviation sigma."""
        x = grid.points
        values = np.exp(-(x - center) ** 2 / (4 * sigma ** 2) + 1j * wavenumber * x)
        return cls(grid, values).normalized()

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(self.density)))

    def normalized(self) -> "WaveFunction":
        norm = self.norm()
        if not norm > 0:
            raise DomainError("cannot normalize a zero wavefunction")
        return replace(self, values=self.values / norm)

    def expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """<fn(x)> over |psi|^2, skipping nodes where the density vanishes."""
        density = self.density
        x = self.grid.points
        support = density > 0
        integrand = np.zeros_like(density)
        integrand[support] = fn(x[support]) * density[support]
        return float(self.grid.integrate(integrand) / self.grid.integrate(density))

    def mean(self) -> float:
        return self.expectation(lambda x: x)

    def variance(self) -> float:
        mean = self.mean()
        return self.expectation(lambda x: (x - mean) ** 2)
