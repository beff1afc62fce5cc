"""
Physical constants shared by every experiment
"""

from dataclasses import dataclass

from core.errors import DomainError


@dataclass(frozen=True)
class PhysicsConstants:
    """Action quantum and particle mass; natural units by default."""
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")

    @property
    def diffusivity(self) -> float:
        """D = hbar / (2 m), always recomputed."""
        return self.hbar / (2.0 * self.mass)

    def as_dict(self) -> dict:
        return {
            "hbar": self.hbar,
            "mass": self.mass,
            "diffusivity": self.diffusivity,
        }


NATURAL_UNITS = PhysicsConstants()


PHASE_CONVENTIONS = {"plus": 1, "minus": -1}


def phase_sign(convention: str) -> int:
    """+1 for exp(+i m x^2 / 2 hbar t) kernels, -1 for the opposite time convention."""
    try:
        return PHASE_CONVENTIONS[convention]
    except KeyError:
        raise DomainError(f"phase convention must be 'plus' or 'minus', got {convention!r}") from None
