"""
Quasiclassical (WKB) wavefunctions
Local momentum, action integrals, allowed and forbidden branches fitted against exact
eigenstates, the classical density and the energy decomposition into mean and
fluctuating kinetic parts.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, quad, simpson
from scipy.optimize import brentq

from core.constants import NATURAL_UNITS, PhysicsConstants
from core.errors import DomainError
from core.grid import Grid1D, WaveFunction
from core.potentials import PotentialSpec
from core.report import ExperimentReport

logger = logging.getLogger(__name__)

GUARD_LIMIT = 0.1
DECOMPOSITION_TOLERANCE = 1e-8
QUAD_LIMIT = 200


@dataclass(frozen=True)
class LocalMomentum:
    """|p| with a regime tag; forbidden points carry the factor i implicitly."""
    value: np.ndarray
    allowed: np.ndarray

    @property
    def regime(self) -> np.ndarray:
        return np.where(self.allowed, "allowed", "forbidden")


def local_momentum(E: float, potential: PotentialSpec, x,
                   constants: PhysicsConstants = NATURAL_UNITS) -> LocalMomentum:
    """sqrt(2m |E - U|); U <= E counts as allowed, so a turning point is allowed with p = 0."""
    gap = E - potential(x)
    return LocalMomentum(np.sqrt(2.0 * constants.mass * np.abs(gap)), gap >= 0)


def amplitude_factor(p) -> np.ndarray:
    """exp(-1/2 ln p), the WKB amplitude p^{-1/2}."""
    with np.errstate(divide="ignore"):
        return np.exp(-0.5 * np.log(np.asarray(p, dtype=float)))


def wavelength_gradient(E: float, potential: PotentialSpec, x,
                        constants: PhysicsConstants = NATURAL_UNITS) -> np.ndarray:
    """|d(hbar/|p|)/dx| = hbar m |U'| / |p|^3; infinite at turning points."""
    p = local_momentum(E, potential, x, constants).value
    with np.errstate(divide="ignore", invalid="ignore"):
        gradient = constants.hbar * constants.mass * np.abs(potential.derivative(x)) / p ** 3
    return np.where(p > 0, gradient, np.inf)


def guard_mask(E: float, potential: PotentialSpec, x, constants: PhysicsConstants = NATURAL_UNITS,
               limit: float = GUARD_LIMIT) -> np.ndarray:
    """True where the reduced wavelength changes faster than `limit` per unit length."""
    return wavelength_gradient(E, potential, x, constants) > limit


def _sqrt_aware_quad(fn: Callable[[float], float], a: float, b: float) -> float:
    """Integral over [a, b] after x = a + (b - a)(1 - cos t)/2, which absorbs square-root endpoints."""
    if a == b:
        return 0.0
    half = 0.5 * (b - a)

    def integrand(t):
        return fn(a + half * (1.0 - math.cos(t))) * half * math.sin(t)

    return quad(integrand, 0.0, math.pi, limit=QUAD_LIMIT)[0]


def _momentum_fn(E: float, potential: PotentialSpec, constants: PhysicsConstants):
    two_m = 2.0 * constants.mass

    def p_abs(s: float) -> float:
        return math.sqrt(two_m * abs(E - float(potential(s))))

    return p_abs


# Turning points

@dataclass
class Region:
    start: float
    end: float
    regime: str
    left_turning: bool
    right_turning: bool


@dataclass
class TurningPoints:
    """Ordered positions where U(x) = E inside a search interval."""
    energy: float
    points: List[float]
    x_min: float
    x_max: float

    def regions(self, potential: PotentialSpec) -> List[Region]:
        edges = [self.x_min] + list(self.points) + [self.x_max]
        out = []
        for i in range(len(edges) - 1):
            a, b = edges[i], edges[i + 1]
            if b <= a:
                continue
            regime = "allowed" if float(potential(0.5 * (a + b))) <= self.energy else "forbidden"
            out.append(Region(a, b, regime, i > 0, i < len(edges) - 2))
        return out


def _turning_points_on(E: float, potential: PotentialSpec, x: np.ndarray) -> List[float]:
    gap = potential(x) - E
    points = []
    for i in range(x.size - 1):
        if gap[i] == 0.0:
            points.append(float(x[i]))
        elif gap[i] * gap[i + 1] < 0:
            points.append(brentq(lambda s: float(potential(s)) - E, x[i], x[i + 1], xtol=1e-14))
    if gap[-1] == 0.0:
        points.append(float(x[-1]))
    return points


def find_turning_points(E: float, potential: PotentialSpec, grid: Grid1D) -> TurningPoints:
    """Sign changes of U - E between grid nodes, refined with brentq."""
    points = _turning_points_on(E, potential, grid.points)
    logger.debug(f"turning points at E={E:g}: {points}")
    return TurningPoints(E, points, grid.x_min, grid.x_max)


# Action integrals

@dataclass
class ActionIntegral:
    s_real: float
    regime: str
    x: np.ndarray
    amplitude_log: np.ndarray


def action_integrals(E: float, potential: PotentialSpec, interval: Tuple[float, float], n_quad: int = 256,
                     constants: PhysicsConstants = NATURAL_UNITS) -> ActionIntegral:
    """Integral of |p| over an interval lying in one regime, and 1/2 ln |p| on n_quad samples."""
    a, b = float(interval[0]), float(interval[1])
    x = np.linspace(a, b, max(int(n_quad), 2))
    gap = potential(x) - E
    if np.any(gap < 0) and np.any(gap > 0):
        logger.error(f"interval [{a:g}, {b:g}] straddles a turning point at E={E:g}")
        raise DomainError(f"interval [{a:g}, {b:g}] straddles a turning point at E={E:g}; split it first")
    regime = "forbidden" if np.any(gap > 0) else "allowed"
    s_real = _sqrt_aware_quad(_momentum_fn(E, potential, constants), a, b)
    p = local_momentum(E, potential, x, constants).value
    with np.errstate(divide="ignore"):
        amplitude_log = 0.5 * np.log(p)
    return ActionIntegral(s_real, regime, x, amplitude_log)


# Branches

@dataclass
class WkbBranch:
    """One region's WKB form: C1 e^{iS/hbar} p^{-1/2} + C2 e^{-iS/hbar} p^{-1/2} or C1 e^{-S/hbar} |p|^{-1/2}."""
    region: str
    start: float
    end: float
    indices: np.ndarray
    action_real: np.ndarray
    action_imag: np.ndarray
    amplitude: np.ndarray
    c1: complex = 1.0
    c2: complex = 0.0

    def basis(self, hbar: float) -> np.ndarray:
        """Columns multiplying (C1, C2) in allowed regions, C1 alone in forbidden ones."""
        if self.region == "allowed":
            phase = np.exp(1j * self.action_real / hbar)
            return np.stack([phase * self.amplitude, np.conj(phase) * self.amplitude], axis=1)
        return (np.exp(-self.action_imag / hbar) * self.amplitude)[:, None].astype(complex)

    def values(self, hbar: float) -> np.ndarray:
        coefficients = [self.c1, self.c2] if self.region == "allowed" else [self.c1]
        return self.basis(hbar) @ np.asarray(coefficients, dtype=complex)


def _cumulative_action(p_abs, start: float, end: float, nodes: np.ndarray) -> Tuple[np.ndarray, float]:
    """Integral of |p| from start to every node, plus the integral over the whole region."""
    out = np.empty(nodes.size)
    total, previous = 0.0, start
    for j, xj in enumerate(nodes):
        total += _sqrt_aware_quad(p_abs, previous, float(xj))
        out[j] = total
        previous = float(xj)
    return out, total + _sqrt_aware_quad(p_abs, previous, end)


def _branches(E: float, potential: PotentialSpec, grid: Grid1D, constants: PhysicsConstants) -> List[WkbBranch]:
    x = grid.points
    p_abs = _momentum_fn(E, potential, constants)
    momentum = local_momentum(E, potential, x, constants).value
    branches = []
    taken = np.zeros(x.size, dtype=bool)
    for region in find_turning_points(E, potential, grid).regions(potential):
        inside = (x >= region.start) & (x <= region.end) & ~taken
        indices = np.flatnonzero(inside)
        taken |= inside
        nodes = x[indices]
        from_start, total = _cumulative_action(p_abs, region.start, region.end, nodes)
        zeros = np.zeros(nodes.size)
        if region.regime == "allowed":
            action_real, action_imag = from_start, zeros
        elif region.right_turning and not region.left_turning:
            # left tail decays away from its right-hand turning point
            action_real, action_imag = zeros, total - from_start
        else:
            action_real, action_imag = zeros, from_start
        branches.append(WkbBranch(region.regime, region.start, region.end, indices,
                                  action_real, action_imag, amplitude_factor(momentum[indices])))
    return branches


@dataclass
class WkbResult:
    wavefunction: WaveFunction
    masked: np.ndarray
    branches: List[WkbBranch] = field(default_factory=list)

    @property
    def n_masked(self) -> int:
        return int(np.count_nonzero(self.masked))


def _assemble(grid: Grid1D, branches: Sequence[WkbBranch], masked: np.ndarray, hbar: float) -> WaveFunction:
    values = np.zeros(grid.n_points, dtype=complex)
    for branch in branches:
        values[branch.indices] = branch.values(hbar)
    values[masked] = 0.0
    return WaveFunction(grid, values)


def wkb_wavefunction(E: float, potential: PotentialSpec, grid: Grid1D,
                     matching: Optional[Sequence[Tuple[complex, complex]]] = None,
                     constants: PhysicsConstants = NATURAL_UNITS, guard: float = GUARD_LIMIT) -> WkbResult:
    """Unnormalized WKB wavefunction, zero and masked inside the turning-point guard bands.

    `matching` holds (C1, C2) per region from left to right; C2 must vanish in forbidden regions.
    """
    branches = _branches(E, potential, grid, constants)
    if matching is not None:
        if len(matching) != len(branches):
            raise DomainError(f"need {len(branches)} (C1, C2) pairs, got {len(matching)}")
        for branch, (c1, c2) in zip(branches, matching):
            if branch.region == "forbidden" and c2 != 0:
                raise DomainError(f"forbidden region [{branch.start:g}, {branch.end:g}] takes C2 = 0, got {c2}")
            branch.c1, branch.c2 = complex(c1), complex(c2)
    masked = guard_mask(E, potential, grid.points, constants, guard)
    if masked.any():
        logger.warning(f"masked {int(masked.sum())} of {grid.n_points} grid points inside turning-point guard bands")
    return WkbResult(_assemble(grid, branches, masked, constants.hbar), masked, branches)


def forbidden_log_derivative(E: float, potential: PotentialSpec, x,
                             constants: PhysicsConstants = NATURAL_UNITS) -> np.ndarray:
    """d ln psi / dx = -|p|/hbar - |p|'/(2|p|) for a branch decaying towards +x."""
    p = local_momentum(E, potential, x, constants).value
    dp = constants.mass * potential.derivative(x) / p
    return -p / constants.hbar - dp / (2.0 * p)


def fit_matching(E: float, potential: PotentialSpec, grid: Grid1D, exact: WaveFunction,
                 constants: PhysicsConstants = NATURAL_UNITS,
                 guard: float = GUARD_LIMIT) -> List[Tuple[complex, complex]]:
    """Least-squares (C1, C2) per region against an exact state, on unmasked points only."""
    branches = _branches(E, potential, grid, constants)
    masked = guard_mask(E, potential, grid.points, constants, guard)
    return _fit(branches, masked, exact.values, constants.hbar)


def _fit(branches, masked, target, hbar) -> List[Tuple[complex, complex]]:
    amplitudes = []
    for branch in branches:
        keep = ~masked[branch.indices]
        if not keep.any():
            amplitudes.append((0j, 0j))
            continue
        design = branch.basis(hbar)[keep]
        solution = np.linalg.lstsq(design, target[branch.indices][keep].astype(complex), rcond=None)[0]
        c2 = complex(solution[1]) if solution.size > 1 else 0j
        amplitudes.append((complex(solution[0]), c2))
    return amplitudes


@dataclass
class WkbComparison:
    energy: float
    relative_error: float
    masked_fraction: float
    frame: pd.DataFrame


def wkb_comparison(E: float, potential: PotentialSpec, exact: WaveFunction,
                   constants: PhysicsConstants = NATURAL_UNITS, guard: float = GUARD_LIMIT) -> WkbComparison:
    """Relative L2 error of the fitted WKB form on unmasked points, with the (x, wkb, exact, mask) table."""
    grid = exact.grid
    branches = _branches(E, potential, grid, constants)
    masked = guard_mask(E, potential, grid.points, constants, guard)
    for branch, (c1, c2) in zip(branches, _fit(branches, masked, exact.values, constants.hbar)):
        branch.c1, branch.c2 = c1, c2
    wkb = _assemble(grid, branches, masked, constants.hbar).values
    keep = ~masked
    error = math.sqrt(np.sum(np.abs(wkb[keep] - exact.values[keep]) ** 2) / np.sum(np.abs(exact.values[keep]) ** 2))
    frame = pd.DataFrame({
        "x": grid.points,
        "wkb_re": wkb.real,
        "wkb_im": wkb.imag,
        "exact": exact.values.real,
        "mask": masked.astype(int),
    })
    logger.info(f"WKB vs exact at E={E:.6g}: relative L2 error {error:.3e} ({masked.mean():.1%} masked)")
    return WkbComparison(E, error, float(masked.mean()), frame)


# Classical density

def classical_density(E: float, potential: PotentialSpec, x,
                      constants: PhysicsConstants = NATURAL_UNITS) -> np.ndarray:
    """Time-averaged classical density proportional to 1/|p| on the allowed set, normalized to one."""
    x = np.asarray(x, dtype=float)
    momentum = local_momentum(E, potential, x, constants)
    p_abs = _momentum_fn(E, potential, constants)
    points = _turning_points_on(E, potential, x)
    total = 0.0
    for region in TurningPoints(E, points, float(x[0]), float(x[-1])).regions(potential):
        if region.regime == "allowed":
            total += _sqrt_aware_quad(lambda s: 1.0 / max(p_abs(s), 1e-300), region.start, region.end)
    if not total > 0:
        raise DomainError(f"no classically allowed region at E={E:g}")
    with np.errstate(divide="ignore"):
        density = np.where(momentum.allowed & (momentum.value > 0), 1.0 / momentum.value, 0.0)
    return density / total


def local_average(density: np.ndarray, x: np.ndarray, wavelength) -> np.ndarray:
    """Mean of density over [x - wavelength/2, x + wavelength/2] at every x."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * np.broadcast_to(np.asarray(wavelength, dtype=float), x.shape)
    cumulative = cumulative_trapezoid(density, x, initial=0.0)
    upper = np.interp(x + half, x, cumulative)
    lower = np.interp(x - half, x, cumulative)
    return (upper - lower) / (2.0 * half)


# Energy decomposition

def momentum_moments(psi: WaveFunction, constants: PhysicsConstants = NATURAL_UNITS) -> Tuple[float, float, float]:
    """<p>, <|p|> and <p^2> from the discrete Fourier transform of psi."""
    grid = psi.grid
    weights = np.abs(np.fft.fft(psi.values)) ** 2
    weights /= weights.sum()
    p = 2.0 * math.pi * constants.hbar * np.fft.fftfreq(grid.n_points, d=grid.dx)
    return float(weights @ p), float(weights @ np.abs(p)), float(weights @ p ** 2)


def _piecewise_simpson(values: np.ndarray, dx: float, cuts: np.ndarray) -> float:
    """Simpson's rule on each stretch between consecutive cut nodes."""
    bounds = [0, *cuts.tolist(), values.size - 1]
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a >= 2:
            total += simpson(values[a:b + 1], dx=dx)
        elif b - a == 1:
            total += 0.5 * dx * (values[a] + values[b])
    return float(total)


def potential_mean(psi: WaveFunction, potential: PotentialSpec) -> float:
    """<U> over |psi|^2 by Simpson's rule, split at nodes where U is singular.

    The density must vanish at a singular node; the integrand is 0 there.
    """
    density = psi.density
    u = np.asarray(potential(psi.grid.points), dtype=float)
    singular = ~np.isfinite(u)
    if np.any(density[singular] > 0):
        raise DomainError(f"potential is singular at x={psi.grid.points[singular][0]:g} "
                          f"where the density is nonzero")
    integrand = np.zeros_like(density)
    integrand[~singular] = u[~singular] * density[~singular]
    cuts = np.flatnonzero(singular)
    return _piecewise_simpson(integrand, psi.grid.dx, cuts) / _piecewise_simpson(density, psi.grid.dx, cuts)


def energy_decomposition_check(eigenstate: WaveFunction, E: float, potential: PotentialSpec,
                               constants: PhysicsConstants = NATURAL_UNITS,
                               tolerance: float = DECOMPOSITION_TOLERANCE) -> ExperimentReport:
    """E against pbar^2/2m + <dp^2>/2m + <U>, with pbar = <p> and <|p|> reported alongside."""
    m = constants.mass
    p_mean, p_abs_mean, p2_mean = momentum_moments(eigenstate, constants)
    dp_sq = p2_mean - p_mean ** 2
    u_mean = potential_mean(eigenstate, potential)
    reconstructed = p_mean ** 2 / (2.0 * m) + dp_sq / (2.0 * m) + u_mean
    residual = abs(E - reconstructed)

    report = ExperimentReport("energy_decomposition")
    report.record_value("p_bar", p_mean)
    report.record_value("p_abs_mean", p_abs_mean)
    report.record_value("dp_sq", dp_sq)
    report.record_value("kinetic_mean", p_mean ** 2 / (2.0 * m))
    report.record_value("kinetic_fluctuation", dp_sq / (2.0 * m))
    report.record_value("potential_mean", u_mean)
    report.record_value("energy", E, reconstructed=reconstructed)
    report.record_residual("energy_decomposition", residual)
    report.check_below("energy_decomposition", residual, tolerance)
    logger.info(f"energy decomposition at E={E:.10g}: residual {residual:.2e}")
    return report
