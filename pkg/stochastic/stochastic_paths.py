"""
Sampled Wiener paths and the velocity / energy estimators built on them
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import joblib
import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from core.constants import NATURAL_UNITS, PhysicsConstants
from core.errors import DomainError
from core.grid import DensityField
from core.report import EstimatorReport, ExperimentReport
from core.rng import check_seed, derive_seed, stream

logger = logging.getLogger(__name__)

MIN_INCREMENTS = 1000
CHUNK_PATHS = 64
IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Path:
    """One discrete path x_0..x_N on the time lattice t_n = n * epsilon."""
    epsilon: float
    positions: np.ndarray
    drift: float = 0.0
    seed_stream_id: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.positions) - 1

    @property
    def times(self) -> np.ndarray:
        return self.epsilon * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class PathEnsemble:
    """Paths sharing epsilon, drift and constants, stored row-wise."""
    positions: np.ndarray
    epsilon: float
    diffusivity: float
    drift: float = 0.0
    constants: PhysicsConstants = NATURAL_UNITS
    master_seed: int = 0

    def __post_init__(self):
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if positions.shape[1] < 3:
            raise DomainError(f"paths need at least 2 steps, got {positions.shape[1] - 1}")
        if not np.all(np.isfinite(positions)):
            raise DomainError("path positions must be finite")
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_positions(cls, positions, epsilon: float, drift: float = 0.0, diffusivity: float = 0.0,
                       constants: PhysicsConstants = NATURAL_UNITS) -> "PathEnsemble":
        """Wrap externally built paths (smooth or hand-made) for the estimators."""
        return cls(np.asarray(positions, dtype=float), epsilon, diffusivity, drift, constants, 0)

    @property
    def n_paths(self) -> int:
        return self.positions.shape[0]

    @property
    def n_steps(self) -> int:
        return self.positions.shape[1] - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.positions, axis=1)

    def path(self, index: int) -> Path:
        return Path(self.epsilon, self.positions[index], self.drift, index)

    def to_frame(self) -> pd.DataFrame:
        """Long table (path_id, step, t, x)."""
        steps = np.arange(self.n_steps + 1)
        return pd.DataFrame({
            "path_id": np.repeat(np.arange(self.n_paths), self.n_steps + 1),
            "step": np.tile(steps, self.n_paths),
            "t": np.tile(self.epsilon * steps, self.n_paths),
            "x": self.positions.ravel(),
        })


def _sample_chunk(master_seed: int, indices: range, n_steps: int, scale: float, shift: float) -> np.ndarray:
    rows = np.zeros((len(indices), n_steps + 1))
    for row, index in enumerate(indices):
        noise = stream(master_seed, index).standard_normal(n_steps)
        rows[row, 1:] = np.cumsum(shift + scale * noise)
    return rows


def sample_wiener_ensemble(n_paths: int, n_steps: int, epsilon: float, D: float, drift: float = 0.0,
                           master_seed: int = 0, constants: PhysicsConstants = NATURAL_UNITS,
                           n_jobs: int = 1) -> PathEnsemble:
    """Paths from x_0 = 0 with i.i.d. increments drift*eps + sqrt(2 D eps) N(0, 1).

    Every path draws from its own counter-based stream, so the result does not
    depend on n_jobs.
    """
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    if n_steps < 2:
        raise DomainError(f"n_steps must be >= 2, got {n_steps}")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not D > 0:
        raise DomainError(f"diffusivity must be positive, got {D}")
    master_seed = check_seed(master_seed)
    scale = math.sqrt(2.0 * D * epsilon)
    chunks = [range(start, min(start + CHUNK_PATHS, n_paths)) for start in range(0, n_paths, CHUNK_PATHS)]
    parts = joblib.Parallel(n_jobs=n_jobs, prefer="threads")(
        joblib.delayed(_sample_chunk)(master_seed, chunk, n_steps, scale, drift * epsilon) for chunk in chunks
    )
    logger.debug(f"sampled {n_paths} paths x {n_steps} steps (eps={epsilon:g}, D={D:g}, drift={drift:g})")
    return PathEnsemble(np.vstack(parts), epsilon, D, drift, constants, master_seed)


# Statistics helpers

def _path_mean_report(name: str, samples: np.ndarray, paper_claim: Optional[float] = None,
                      **notes: float) -> EstimatorReport:
    """Mean of a (n_paths, k) sample array; stderr from the spread of per-path means."""
    samples = np.atleast_2d(samples)
    path_means = samples.mean(axis=1)
    n_paths = path_means.size
    if n_paths > 1:
        stderr = float(path_means.std(ddof=1) / math.sqrt(n_paths))
    else:
        stderr = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    return EstimatorReport(name, float(path_means.mean()), stderr, int(samples.size), paper_claim, dict(notes))


def _warn_small(count: int, what: str) -> None:
    if count < MIN_INCREMENTS:
        logger.warning(f"{what} uses only {count} samples (< {MIN_INCREMENTS}); stderr is unreliable")


def fit_loglog_slope(x, y) -> float:
    """Slope of log y against log x by least squares."""
    model = LinearRegression().fit(np.log(np.asarray(x, dtype=float)).reshape(-1, 1),
                                   np.log(np.asarray(y, dtype=float)))
    return float(model.coef_[0])


def fit_linear_slope(x, y) -> float:
    model = LinearRegression().fit(np.asarray(x, dtype=float).reshape(-1, 1), np.asarray(y, dtype=float))
    return float(model.coef_[0])


# Estimators

def increment_variance(ensemble: PathEnsemble) -> EstimatorReport:
    """Mean of (dx - drift*eps)^2, the sample variance of the increments."""
    centred = ensemble.increments - ensemble.drift * ensemble.epsilon
    return _path_mean_report("increment_variance", centred ** 2,
                             target=2.0 * ensemble.diffusivity * ensemble.epsilon)


def mean_displacement(ensemble: PathEnsemble) -> EstimatorReport:
    """Ensemble mean of x_N - x_0 - drift*t_N."""
    t_end = ensemble.epsilon * ensemble.n_steps
    shift = ensemble.positions[:, -1] - ensemble.positions[:, 0] - ensemble.drift * t_end
    return _path_mean_report("mean_displacement", shift[:, None])


def estimate_diffusion(ensemble: PathEnsemble) -> EstimatorReport:
    """Mean over all increments of (dx - drift*eps)^2 / (2 eps).

    Claimed against the D the paths were sampled with; hand-built paths without one
    fall back to hbar / 2m.
    """
    centred = ensemble.increments - ensemble.drift * ensemble.epsilon
    _warn_small(centred.size, "estimate_diffusion")
    claim = ensemble.diffusivity if ensemble.diffusivity > 0 else ensemble.constants.diffusivity
    return _path_mean_report("diffusion", centred ** 2 / (2.0 * ensemble.epsilon), paper_claim=claim)


def estimate_diffusion_from_density(density: DensityField, tau: float) -> float:
    """Second-moment diffusivity Var(x) / (2 tau) of a density that started as a point."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return density.variance() / (2.0 * tau)


def mean_square_displacement(ensemble: PathEnsemble) -> EstimatorReport:
    """<(x_N - x_0 - drift*t_N)^2>, expected 2 D t_N."""
    t_end = ensemble.epsilon * ensemble.n_steps
    shift = ensemble.positions[:, -1] - ensemble.positions[:, 0] - ensemble.drift * t_end
    return _path_mean_report("mean_square_displacement", shift[:, None] ** 2,
                             target=2.0 * ensemble.diffusivity * t_end)


def forward_backward_velocity(path: Path, n: int) -> Tuple[float, float]:
    """(v+, v-) = ((x_{n+1} - x_n) / eps, (x_n - x_{n-1}) / eps) at an interior index."""
    if not 1 <= n <= path.n_steps - 1:
        raise DomainError(f"index {n} is not interior to a path with {path.n_steps} steps")
    x = path.positions
    return float((x[n + 1] - x[n]) / path.epsilon), float((x[n] - x[n - 1]) / path.epsilon)


def velocity_samples(ensemble: PathEnsemble) -> Tuple[np.ndarray, np.ndarray]:
    """v+ and v- at every interior point, each shaped (n_paths, n_steps - 1)."""
    v = ensemble.increments / ensemble.epsilon
    return v[:, 1:], v[:, :-1]


def half_gap_rms(ensemble: PathEnsemble) -> EstimatorReport:
    """RMS of (v+ - v-)/2; Gaussian increment algebra gives sqrt(D / eps)."""
    v_plus, v_minus = velocity_samples(ensemble)
    mean_sq = _path_mean_report("half_gap_sq", (0.5 * (v_plus - v_minus)) ** 2)
    rms = math.sqrt(mean_sq.estimate)
    stderr = mean_sq.stderr / (2.0 * rms) if rms > 0 else 0.0
    return EstimatorReport("half_gap_rms", rms, stderr, mean_sq.n_samples,
                           math.sqrt(2.0 * ensemble.diffusivity / ensemble.epsilon),
                           {"target": math.sqrt(ensemble.diffusivity / ensemble.epsilon)})


def velocity_correlation(ensemble: PathEnsemble) -> EstimatorReport:
    """Correlation coefficient of v+ and v- at the same point."""
    v_plus, v_minus = velocity_samples(ensemble)
    if v_plus.std() == 0.0 or v_minus.std() == 0.0:
        return EstimatorReport("velocity_correlation", 0.0, 0.0, int(v_plus.size))
    z_plus = (v_plus - v_plus.mean()) / v_plus.std()
    z_minus = (v_minus - v_minus.mean()) / v_minus.std()
    return _path_mean_report("velocity_correlation", z_plus * z_minus)


def nondifferentiability_gap(ensemble: PathEnsemble) -> EstimatorReport:
    """RMS(v+ - v-) over the ensemble; sqrt(4 D / eps) for Wiener paths."""
    v_plus, v_minus = velocity_samples(ensemble)
    _warn_small(v_plus.size, "nondifferentiability_gap")
    mean_sq = _path_mean_report("gap_sq", (v_plus - v_minus) ** 2)
    rms = math.sqrt(mean_sq.estimate)
    stderr = mean_sq.stderr / (2.0 * rms) if rms > 0 else 0.0
    return EstimatorReport("nondifferentiability_gap", rms, stderr, mean_sq.n_samples,
                           None, {"target": math.sqrt(4.0 * ensemble.diffusivity / ensemble.epsilon)})


def osmotic_speed(ensemble: PathEnsemble) -> EstimatorReport:
    """u^2 as the mean of (dx)^2 / eps^2.

    The claimed value hbar / (2 m eps) is the paper_claim; 2D/eps rides along in notes.
    """
    eps = ensemble.epsilon
    c = ensemble.constants
    return _path_mean_report("osmotic_speed_sq", ensemble.increments ** 2 / eps ** 2,
                             paper_claim=c.hbar / (2.0 * c.mass * eps),
                             claim_two_d_over_eps=2.0 * ensemble.diffusivity / eps,
                             claim_hbar_over_two_m_eps=c.hbar / (2.0 * c.mass * eps))


def kinetic_energy_estimators(ensemble: PathEnsemble) -> Dict[str, EstimatorReport]:
    """Naive and symmetric kinetic-energy estimators.

    naive:     m (d+x)^2 / (4 eps^2) + m (d-x)^2 / (4 eps^2)
    symmetric: m (d+x)(d-x) / (2 eps^2)
    """
    m = ensemble.constants.mass
    v_plus, v_minus = velocity_samples(ensemble)
    _warn_small(v_plus.size, "kinetic_energy_estimators")
    claim = 0.5 * m * ensemble.drift ** 2
    naive = _path_mean_report("naive_kinetic_energy", 0.25 * m * (v_plus ** 2 + v_minus ** 2),
                              divergent_part=m * ensemble.diffusivity / ensemble.epsilon + claim)
    symmetric = _path_mean_report("symmetric_kinetic_energy", 0.5 * m * v_plus * v_minus, paper_claim=claim)
    return {"naive": naive, "symmetric": symmetric}


def velocity_identity_residual(ensemble: PathEnsemble) -> float:
    """Max of |(v+)^2 + (v-)^2 - 2 v+ v- - (v+ - v-)^2| relative to the largest (v+)^2 + (v-)^2."""
    v_plus, v_minus = velocity_samples(ensemble)
    scale = float(np.max(v_plus ** 2 + v_minus ** 2))
    if scale == 0.0:
        return 0.0
    lhs = v_plus ** 2 + v_minus ** 2 - 2.0 * v_plus * v_minus
    return float(np.max(np.abs(lhs - (v_plus - v_minus) ** 2)) / scale)


def complex_velocity_energy(v: complex, u: complex, mass: float = 1.0) -> Tuple[complex, complex]:
    """Both sides of (m/2)(v + iu)(v - iu) == (m/2)(v^2 + u^2)."""
    lhs = 0.5 * mass * (v + 1j * u) * (v - 1j * u)
    rhs = 0.5 * mass * (v * v + u * u)
    return complex(lhs), complex(rhs)


# Sweeps

def _sweep_ensembles(epsilons: Iterable[float], n_paths: int, n_steps: int, D: float, drift: float,
                     master_seed: int, constants: PhysicsConstants, n_jobs: int) -> List[PathEnsemble]:
    return [
        sample_wiener_ensemble(n_paths, n_steps, eps, D, drift, derive_seed(master_seed, f"eps={eps!r}"),
                               constants, n_jobs)
        for eps in epsilons
    ]


def gap_sweep(epsilons: Iterable[float], n_paths: int, n_steps: int, D: float, master_seed: int,
              constants: PhysicsConstants = NATURAL_UNITS, n_jobs: int = 1) -> Tuple[float, pd.DataFrame]:
    """RMS gap at each eps and its fitted log-log slope (expected -1/2)."""
    rows = []
    for ensemble in _sweep_ensembles(epsilons, n_paths, n_steps, D, 0.0, master_seed, constants, n_jobs):
        gap = nondifferentiability_gap(ensemble)
        rows.append({"eps": ensemble.epsilon, "rms_gap": gap.estimate, "rms_gap_stderr": gap.stderr,
                     "expected": gap.notes["target"]})
    frame = pd.DataFrame(rows, columns=["eps", "rms_gap", "rms_gap_stderr", "expected"])
    return fit_loglog_slope(frame["eps"], frame["rms_gap"]), frame


def kinetic_sweep(epsilons: Iterable[float], n_paths: int, n_steps: int, D: float, drift: float,
                  master_seed: int, constants: PhysicsConstants = NATURAL_UNITS,
                  n_jobs: int = 1) -> pd.DataFrame:
    """Naive and symmetric kinetic estimators over an eps sweep."""
    rows = []
    for ensemble in _sweep_ensembles(epsilons, n_paths, n_steps, D, drift, master_seed, constants, n_jobs):
        estimators = kinetic_energy_estimators(ensemble)
        rows.append({
            "eps": ensemble.epsilon,
            "naive_ke": estimators["naive"].estimate,
            "naive_stderr": estimators["naive"].stderr,
            "symm_ke": estimators["symmetric"].estimate,
            "symm_stderr": estimators["symmetric"].stderr,
        })
    return pd.DataFrame(rows, columns=["eps", "naive_ke", "naive_stderr", "symm_ke", "symm_stderr"])


# Deterministic uncertainty chain

def uncertainty_products(epsilon: float, constants: PhysicsConstants = NATURAL_UNITS,
                         report: Optional[ExperimentReport] = None) -> ExperimentReport:
    """Position-momentum and energy-time products from the short-time step size.

    dx^2 = hbar eps / m, <dx^2> = dx^2 / 2, <dp^2> = m hbar / (2 eps);
    u^2 = hbar / (2 m eps), dE = m u^2 / 2, dt = eps.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    hbar, m = constants.hbar, constants.mass
    report = report or ExperimentReport("uncertainty_products")
    suffix = f"@eps={epsilon:g}"
    step_sq = hbar * epsilon / m
    mean_dx_sq = step_sq / 2.0
    mean_dp_sq = m * hbar / (2.0 * epsilon)
    product = mean_dx_sq * mean_dp_sq
    u_sq = hbar / (2.0 * m * epsilon)
    delta_e = 0.5 * m * u_sq
    energy_time = (delta_e * epsilon) ** 2
    claim = (hbar / 2.0) ** 2
    report.record_value(f"step_sq{suffix}", step_sq)
    report.record_value(f"mean_dx_sq{suffix}", mean_dx_sq)
    report.record_value(f"mean_dp_sq{suffix}", mean_dp_sq)
    report.record_value(f"xp_product{suffix}", product, paper_claim=claim)
    report.record_value(f"osmotic_speed_sq{suffix}", u_sq)
    report.record_value(f"delta_energy{suffix}", delta_e)
    report.record_value(f"energy_time_product{suffix}", energy_time, paper_claim=claim,
                        claim_over_derived=claim / energy_time)
    return report
