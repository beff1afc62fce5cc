"""
Orbital angular momentum dispersions
Ladder-operator matrices for a fixed l, exact moments on |l, m> basis states and the
equality case of the coupled uncertainty relations for cylindrical and spherical symmetry.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from core.errors import DomainError

logger = logging.getLogger(__name__)

AXES = ("Lx", "Ly", "Lz")
SYMMETRIES = ("cylindrical", "spherical")


@dataclass
class AngularMomentumReport:
    """Dispersions of Lx, Ly, Lz plus <Lz> and <L^2>, with the claimed values beside them."""
    l: int
    dispersions: Dict[str, float]
    lz_mean: float
    l2_total: float
    paper_claims: Dict[str, float] = field(default_factory=dict)
    m: Optional[int] = None

    @property
    def dispersion_sum(self) -> float:
        return float(sum(self.dispersions[axis] for axis in AXES))

    def identity_residual(self) -> float:
        """|<L^2> - <Lz>^2 - sum of dispersions|; zero whenever <Lx> = <Ly> = 0."""
        return abs(self.l2_total - self.lz_mean ** 2 - self.dispersion_sum)

    def robertson_margin(self, hbar: float = 1.0) -> float:
        """<dLx^2><dLy^2> - (hbar^2 / 4) <Lz>^2, non-negative for every physical state."""
        return self.dispersions["Lx"] * self.dispersions["Ly"] - 0.25 * hbar ** 2 * self.lz_mean ** 2

    def as_dict(self) -> dict:
        return {
            "l": self.l,
            "m": self.m,
            "dispersions": dict(self.dispersions),
            "lz_mean": self.lz_mean,
            "l2_total": self.l2_total,
            "paper_claims": dict(sorted(self.paper_claims.items())),
        }


def _check_integer(value: float, what: str) -> int:
    rounded = int(round(value))
    if not math.isclose(value, rounded, rel_tol=0.0, abs_tol=1e-12):
        raise DomainError(f"{what} must be an integer, got {value}")
    return rounded


def ladder_matrices(l: int, hbar: float = 1.0) -> Dict[str, np.ndarray]:
    """Lx, Ly, Lz, L+ and L- in the (2l+1)-dimensional basis ordered m = l, l-1, ..., -l."""
    if l < 0:
        raise DomainError(f"l must be >= 0, got {l}")
    m = -np.arange(-l, l + 1, dtype=float)
    lz = np.diag(m).astype(complex)
    # <m+1| L+ |m> = sqrt(l(l+1) - m(m+1))
    raising = np.diag(np.sqrt(l * (l + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    lowering = raising.conj().T
    matrices = {
        "Lx": 0.5 * (raising + lowering),
        "Ly": -0.5j * (raising - lowering),
        "Lz": lz,
        "L+": raising,
        "L-": lowering,
    }
    return {name: hbar * matrix for name, matrix in matrices.items()}


def claimed_moments(lz_quantum: int, symmetry: str = "cylindrical", hbar: float = 1.0) -> Dict[str, float]:
    """Dispersions from the equality case of the coupled relations, and the total they imply."""
    if symmetry not in SYMMETRIES:
        raise DomainError(f"symmetry must be one of {SYMMETRIES}, got {symmetry!r}")
    quarter = 0.25 * hbar ** 2
    if symmetry == "spherical":
        dispersions = {"Lx": quarter, "Ly": quarter, "Lz": quarter}
        lz_mean = 0.0
    else:
        # <dLx^2> <dLy^2> >= (hbar^2/4) <Lz>^2 at equality with <dLx^2> = <dLy^2>
        side = 0.5 * abs(lz_quantum) * hbar ** 2
        dispersions = {"Lx": side, "Ly": side, "Lz": quarter}
        lz_mean = lz_quantum * hbar
    claims = {f"d{axis}_sq": value for axis, value in dispersions.items()}
    claims["lz_mean"] = lz_mean
    claims["l2_total"] = lz_mean ** 2 + sum(dispersions.values())
    return claims


def angular_momentum_oracle(l: int, m: int, hbar: float = 1.0) -> AngularMomentumReport:
    """Exact moments on the basis state |l, m> from the matrix representation."""
    if l < 0 or abs(m) > l:
        raise DomainError(f"need |m| <= l with l >= 0, got l={l}, m={m}")
    ops = ladder_matrices(l, hbar)
    state = np.zeros(2 * l + 1, dtype=complex)
    state[l - m] = 1.0

    def moment(op):
        return float(np.real(np.vdot(state, op @ state)))

    dispersions = {}
    total = 0.0
    for axis in AXES:
        mean = moment(ops[axis])
        second = moment(ops[axis] @ ops[axis])
        dispersions[axis] = second - mean ** 2
        total += second
    report = AngularMomentumReport(
        l=l,
        m=m,
        dispersions=dispersions,
        lz_mean=moment(ops["Lz"]),
        l2_total=total,
        paper_claims=claimed_moments(m, "cylindrical", hbar),
    )
    report.paper_claims["l2_gap"] = report.paper_claims["l2_total"] - report.l2_total
    logger.debug(f"oracle l={l} m={m}: {dispersions}, <L^2>={total:.6g}")
    return report


def minimal_dispersion_solver(lz_mean: float, symmetry: str = "cylindrical",
                              hbar: float = 1.0) -> AngularMomentumReport:
    """Equality case of the uncertainty relations under the symmetry ansatz.

    cylindrical: <Lz> = l hbar, <dLx^2> = <dLy^2> = l hbar^2 / 2, <dLz^2> = hbar^2 / 4
    spherical:   <Lz> = 0, every dispersion hbar^2 / 4
    """
    if symmetry not in SYMMETRIES:
        raise DomainError(f"symmetry must be one of {SYMMETRIES}, got {symmetry!r}")
    l = _check_integer(lz_mean / hbar, "Lz_mean / hbar")
    if symmetry == "spherical" and l != 0:
        raise DomainError(f"spherical symmetry needs <Lz> = 0, got {lz_mean}")
    claims = claimed_moments(l, symmetry, hbar)
    dispersions = {axis: claims[f"d{axis}_sq"] for axis in AXES}
    return AngularMomentumReport(
        l=abs(l),
        dispersions=dispersions,
        lz_mean=claims["lz_mean"],
        l2_total=claims["l2_total"],
        paper_claims=claims,
    )


def completed_square_gap(l: int, hbar: float = 1.0) -> float:
    """(l hbar + hbar/2)^2 - hbar^2 l (l+1); always hbar^2 / 4."""
    return (l * hbar + 0.5 * hbar) ** 2 - hbar ** 2 * l * (l + 1)
