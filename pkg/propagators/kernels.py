"""
Heat and free quantum propagator kernels

Closed forms, Chapman-Kolmogorov composition checks, multi-slice composition and
kernel-driven propagation of densities and wavefunctions.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import fftconvolve
from scipy.special import erfc

from core.constants import PhysicsConstants, phase_sign
from core.errors import DomainError, QuadratureError, StabilityError
from core.grid import DensityField, Grid1D, WaveFunction
from core.report import ExperimentReport
from propagators.quadrature import (
    quantum_quadrature_grid,
    richardson_extrapolate,
    short_time_stencil,
)

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("heat", "quantum")
DEFAULT_DAMPINGS = (1e-2, 1e-3, 1e-4)
TEST_DISPLACEMENTS = (-1.0, 0.0, 1.0)
LEAKAGE_LIMIT = 1e-6


# Closed forms

def heat_kernel(displacement, tau: float, D: float):
    """Gaussian transition density (4 pi D tau)^{-1/2} exp(-x^2 / 4 D tau)."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if not D > 0:
        raise DomainError(f"diffusivity must be positive, got {D}")
    x = np.asarray(displacement, dtype=float)
    return np.exp(-x ** 2 / (4.0 * D * tau)) / np.sqrt(4.0 * math.pi * D * tau)


def quantum_kernel(displacement, t: float, constants: PhysicsConstants, convention: str = "plus"):
    """Free propagator sqrt(m / 2 pi i hbar t) exp(i m x^2 / 2 hbar t), principal branch."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    sign = phase_sign(convention)
    m, hbar = constants.mass, constants.hbar
    x = np.asarray(displacement, dtype=float)
    prefactor = math.sqrt(m / (2.0 * math.pi * hbar * t)) * np.exp(-sign * 0.25j * math.pi)
    return prefactor * np.exp(sign * 1j * m * x ** 2 / (2.0 * hbar * t))


def continued_heat_kernel(displacement, t: float, constants: PhysicsConstants, convention: str = "plus"):
    """Heat kernel with D replaced by +-i hbar / 2m; equals quantum_kernel."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    x = np.asarray(displacement, dtype=float)
    D = phase_sign(convention) * 1j * constants.diffusivity
    return np.exp(-x ** 2 / (4.0 * D * t)) / np.sqrt(4.0 * math.pi * D * t)


def _kernel(kind: str, displacement, t: float, constants: PhysicsConstants, convention: str):
    if kind == "heat":
        return heat_kernel(displacement, t, constants.diffusivity)
    if kind == "quantum":
        return quantum_kernel(displacement, t, constants, convention)
    raise DomainError(f"kernel kind must be one of {KERNEL_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class KernelTable:
    """Kernel values over grid displacements."""
    kind: str
    tau: float
    displacements: np.ndarray
    values: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        values = np.asarray(self.values, dtype=complex)
        return pd.DataFrame({
            "displacement": self.displacements,
            "re": values.real,
            "im": values.imag,
        })


def kernel_table(kind: str, tau: float, grid: Grid1D, constants: PhysicsConstants,
                 convention: str = "plus") -> KernelTable:
    x = grid.points
    return KernelTable(kind, tau, x, _kernel(kind, x, tau, constants, convention))


# Composition

def _check_quantum_damping(kind: str, damping: float) -> None:
    if kind == "quantum" and not damping > 0:
        logger.error("quantum kernel composition requested without damping")
        raise QuadratureError("quantum kernel composition needs damping > 0 "
                              "(the undamped oscillatory integral does not converge)")
    if damping < 0:
        raise DomainError(f"damping must be >= 0, got {damping}")


def damped_kernel_integral(t: float, constants: PhysicsConstants,
                           dampings: Sequence[float] = DEFAULT_DAMPINGS,
                           convention: str = "plus") -> Tuple[List[complex], complex]:
    """Integral of K(x, t) e^{-delta x^2} over the line for each damping, plus the delta -> 0 extrapolation."""
    chirp = constants.mass / (2.0 * constants.hbar * t)
    values = []
    for delta in dampings:
        _check_quantum_damping("quantum", delta)
        grid = quantum_quadrature_grid(chirp, delta)
        x = grid.points
        integrand = quantum_kernel(x, t, constants, convention) * np.exp(-delta * x ** 2)
        values.append(complex(grid.integrate(integrand)))
    return values, richardson_extrapolate(dampings, values)


def chapman_kolmogorov_residual(kernel_kind: str, tau_total: float, split: float, grid: Optional[Grid1D],
                                damping: float = 0.0, constants: PhysicsConstants = PhysicsConstants(),
                                convention: str = "plus") -> float:
    """Max over test displacements of |int K(x1->x3, s tau) K(x3->x2, (1-s) tau) dx3 - K(x1->x2, tau)|.

    The heat integral runs over `grid`. The quantum integral is weighted by
    e^{-damping x3^2} and runs over a grid sized from the damping and the kernel chirp.
    """
    if not 0.0 < split < 1.0:
        raise DomainError(f"split must lie in (0, 1), got {split}")
    if not tau_total > 0:
        raise DomainError(f"tau must be positive, got {tau_total}")
    _check_quantum_damping(kernel_kind, damping)
    t1, t2 = split * tau_total, (1.0 - split) * tau_total
    if kernel_kind == "quantum":
        chirp = constants.mass / (2.0 * constants.hbar) * (1.0 / t1 + 1.0 / t2)
        grid = quantum_quadrature_grid(chirp, damping)
    x3 = grid.points
    weight = np.exp(-damping * x3 ** 2) if damping > 0 else 1.0
    ends = [x for x in TEST_DISPLACEMENTS if grid.x_min <= x <= grid.x_max]
    residual = 0.0
    for x1 in ends:
        first = _kernel(kernel_kind, x3 - x1, t1, constants, convention)
        for x2 in ends:
            second = _kernel(kernel_kind, x2 - x3, t2, constants, convention)
            composed = grid.integrate(first * second * weight)
            direct = _kernel(kernel_kind, x2 - x1, tau_total, constants, convention)
            residual = max(residual, float(abs(composed - direct)))
    return residual


def ck_damping_sweep(tau_total: float, split: float, constants: PhysicsConstants,
                     dampings: Iterable[float] = DEFAULT_DAMPINGS[:2],
                     convention: str = "plus") -> pd.DataFrame:
    """Quantum composition residual for each damping level."""
    rows = []
    for delta in dampings:
        residual = chapman_kolmogorov_residual("quantum", tau_total, split, None, delta, constants, convention)
        logger.info(f"quantum CK residual at damping {delta:g}: {residual:.3e}")
        rows.append({"damping": float(delta), "residual": residual})
    return pd.DataFrame(rows, columns=["damping", "residual"])


def multi_slice_kernel(kernel_kind: str, tau_total: float, n_slices: int, grid: Grid1D,
                       damping: float = 0.0, constants: PhysicsConstants = PhysicsConstants(),
                       convention: str = "plus") -> KernelTable:
    """n-fold composition of slice kernels of duration tau/n over a symmetric grid.

    Quantum slices carry the damping e^{-damping x^2} over their own displacement.
    """
    if n_slices < 1:
        raise DomainError(f"n_slices must be >= 1, got {n_slices}")
    if not grid.is_symmetric():
        raise DomainError("multi-slice composition needs an odd grid centred on zero")
    if n_slices == 1:
        return kernel_table(kernel_kind, tau_total, grid, constants, convention)
    _check_quantum_damping(kernel_kind, damping)
    slice_tau = tau_total / n_slices
    x = grid.points
    if kernel_kind == "quantum":
        chirp = constants.mass / (2.0 * constants.hbar * slice_tau)
        if 2.0 * chirp * grid.x_max * grid.dx > 1.01 * math.pi / 2.0:
            needed = math.pi / (4.0 * chirp * grid.x_max)
            raise QuadratureError(f"grid spacing {grid.dx:.3g} does not resolve the slice kernel; need dx <= {needed:.3g}")
    one = _kernel(kernel_kind, x, slice_tau, constants, convention)
    if damping > 0:
        one = one * np.exp(-damping * x ** 2)
    composed = one
    for _ in range(n_slices - 1):
        composed = fftconvolve(composed, one, mode="same") * grid.dx
    return KernelTable(kernel_kind, tau_total, x, composed)


def multi_slice_deviation(kernel_kind: str, tau_total: float, n_slices: int, grid: Grid1D,
                          damping: float = 0.0, constants: PhysicsConstants = PhysicsConstants(),
                          window: float = 3.0, convention: str = "plus") -> float:
    """Max |composed - direct| over displacements with |x| <= window."""
    composed = multi_slice_kernel(kernel_kind, tau_total, n_slices, grid, damping, constants, convention)
    direct = kernel_table(kernel_kind, tau_total, grid, constants, convention)
    inside = np.abs(grid.points) <= window
    return float(np.max(np.abs(composed.values[inside] - direct.values[inside])))


# Propagation

def _offsets(grid: Grid1D) -> np.ndarray:
    return grid.dx * np.arange(-(grid.n_points - 1), grid.n_points)


def _convolve_on_grid(grid: Grid1D, values: np.ndarray, kernel_on_offsets: np.ndarray) -> np.ndarray:
    n = grid.n_points
    full = fftconvolve(values * grid.trapezoid_weights(), kernel_on_offsets, mode="full")
    return full[n - 1:2 * n - 1]


def density_leakage(w0: DensityField, tau: float, D: float) -> float:
    """Probability mass carried past the grid edges by one heat-kernel step."""
    grid = w0.grid
    x = grid.points
    spread = math.sqrt(4.0 * D * tau)
    escape = 0.5 * erfc((grid.x_max - x) / spread) + 0.5 * erfc((x - grid.x_min) / spread)
    return float(grid.integrate(w0.values * escape))


def _flag_leakage(message: str, report: Optional[ExperimentReport]) -> None:
    if report is None:
        logger.warning(message)
    else:
        report.warn(message)


def propagate_density(w0: DensityField, tau: float, D: float,
                      report: Optional[ExperimentReport] = None) -> DensityField:
    """Convolve W with the heat kernel over the grid (zero padding outside).

    Mass carried past the edges above LEAKAGE_LIMIT is flagged on report, or logged without one.
    """
    grid = w0.grid
    kernel = heat_kernel(_offsets(grid), tau, D)
    values = _convolve_on_grid(grid, w0.values, kernel)
    values = np.maximum(values, 0.0)
    leakage = density_leakage(w0, tau, D)
    if leakage > LEAKAGE_LIMIT:
        _flag_leakage(f"density leaks {leakage:.2e} of its mass past the grid edges", report)
    return DensityField(grid, values)


def diffusion_residual(w_prev: DensityField, w_mid: DensityField, w_next: DensityField,
                       dt: float, D: float) -> float:
    """Max interior |dW/dt - D d2W/dx2| with central differences in t and x."""
    dx = w_mid.grid.dx
    dwdt = (w_next.values - w_prev.values) / (2.0 * dt)
    laplacian = (w_mid.values[2:] - 2.0 * w_mid.values[1:-1] + w_mid.values[:-2]) / dx ** 2
    return float(np.max(np.abs(dwdt[1:-1] - D * laplacian)))


def propagate_wavefunction(psi0: WaveFunction, t: float, constants: PhysicsConstants,
                           damping: float = 0.0, convention: str = "plus",
                           report: Optional[ExperimentReport] = None) -> WaveFunction:
    """Convolve psi with the free quantum kernel.

    Uses the kernel sampled on the field grid when its chirp is resolved over the
    whole grid width, the sub-grid short-time stencil otherwise. Without damping the
    norm is conserved, so a norm loss above LEAKAGE_LIMIT is flagged as leakage.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    grid = psi0.grid
    chirp_rate = constants.mass * grid.width / (constants.hbar * t)
    if chirp_rate <= math.pi / (2.0 * grid.dx):
        offsets = _offsets(grid)
        kernel = quantum_kernel(offsets, t, constants, convention)
        if damping > 0:
            kernel = kernel * np.exp(-damping * offsets ** 2)
        values = _convolve_on_grid(grid, psi0.values, kernel)
    else:
        stencil = short_time_stencil(grid.dx, t, constants, damping, convention)
        values = stencil.apply(grid, psi0.values)
    psi = WaveFunction(grid, values)
    if damping == 0 and psi0.norm() > 0:
        loss = abs(1.0 - psi.norm() ** 2 / psi0.norm() ** 2)
        if loss > LEAKAGE_LIMIT:
            _flag_leakage(f"wavefunction loses {loss:.2e} of its norm past the grid edges", report)
    return psi


def free_schrodinger_residual(psi_prev: WaveFunction, psi_mid: WaveFunction, psi_next: WaveFunction,
                              dt: float, constants: PhysicsConstants, convention: str = "plus") -> float:
    """Max interior |i hbar dpsi/dt + (hbar^2 / 2m) d2psi/dx2| (sign flipped for the minus convention)."""
    sign = phase_sign(convention)
    dx = psi_mid.grid.dx
    dpsidt = (psi_next.values - psi_prev.values) / (2.0 * dt)
    laplacian = (psi_mid.values[2:] - 2.0 * psi_mid.values[1:-1] + psi_mid.values[:-2]) / dx ** 2
    residual = sign * 1j * constants.hbar * dpsidt[1:-1] + constants.hbar ** 2 / (2.0 * constants.mass) * laplacian
    return float(np.max(np.abs(residual)))


# Fokker-Planck

def fokker_planck_step(w: DensityField, drift_field, D: float, dt: float) -> DensityField:
    """One explicit finite-volume step of dW/dt = -d(Wv)/dx + D d2W/dx2 with zero-flux walls.

    End nodes own half cells so the trapezoid mass is conserved exactly. With centred
    fluxes, dt <= dx^2 / 4D together with a cell Peclet number |v| dx / 2D <= 1 keeps W >= 0;
    either violation raises StabilityError.
    """
    if not D > 0:
        raise DomainError(f"diffusivity must be positive, got {D}")
    dx = w.grid.dx
    limit = dx ** 2 / (4.0 * D)
    if dt > limit:
        logger.error(f"explicit step dt={dt:g} exceeds the stability limit")
        raise StabilityError(f"dt={dt:g} is unstable for dx={dx:g}, D={D:g}; need dt <= {limit:.6g}")
    v = np.broadcast_to(np.asarray(drift_field, dtype=float), w.values.shape)
    v_face = 0.5 * (v[1:] + v[:-1])
    v_max = float(np.max(np.abs(v_face)))
    peclet = v_max * dx / (2.0 * D)
    if peclet > 1.0:
        logger.error(f"cell Peclet number {peclet:.3g} > 1 for centred fluxes")
        raise StabilityError(f"cell Peclet number {peclet:.3g} > 1 for max|v|={v_max:g}, D={D:g}; "
                             f"need dx <= {2.0 * D / v_max:.6g} or D >= {0.5 * v_max * dx:.6g}")

    W = w.values
    flux = v_face * 0.5 * (W[1:] + W[:-1]) - D * (W[1:] - W[:-1]) / dx
    divergence = np.zeros_like(W)
    divergence[:-1] += flux
    divergence[1:] -= flux
    cell = np.full(W.shape, dx)
    cell[0] = cell[-1] = 0.5 * dx
    values = W - dt * divergence / cell
    return DensityField(w.grid, values)


def relax_fokker_planck(w: DensityField, drift_field, D: float, dt: float, n_steps: int) -> DensityField:
    """Iterate fokker_planck_step n_steps times."""
    for _ in range(n_steps):
        w = fokker_planck_step(w, drift_field, D, dt)
    return w
