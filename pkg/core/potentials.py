"""
External potentials U(x)
Evaluated on numpy arrays; the same spec serves 1D lines and radial half-lines.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from core.errors import DomainError

KINDS = ("free", "harmonic", "barrier", "coulomb_regularized", "coulomb")


@dataclass(frozen=True)
class PotentialSpec:
    """Named potential shape plus its parameters.

    kinds and parameters:
        free                 -
        harmonic             k > 0, center
        barrier              height, width > 0, center, edge >= 0 (tanh smoothing length)
        coulomb_regularized  charge, softening > 0
        coulomb              charge (radial problems only, singular at 0)
    """
    kind: str = "free"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown potential kind '{self.kind}', expected one of {KINDS}")
        p = self.params
        if self.kind == "harmonic" and not p.get("k", 0.0) > 0:
            raise DomainError(f"harmonic potential needs k > 0, got {p.get('k')}")
        if self.kind == "barrier" and not p.get("width", 0.0) > 0:
            raise DomainError(f"barrier needs width > 0, got {p.get('width')}")
        if self.kind == "barrier" and p.get("edge", 0.0) < 0:
            raise DomainError(f"barrier edge must be >= 0, got {p.get('edge')}")
        if self.kind == "coulomb_regularized" and not p.get("softening", 0.0) > 0:
            raise DomainError(f"regularized coulomb needs softening > 0, got {p.get('softening')}")

    # Constructors
    @classmethod
    def free(cls) -> "PotentialSpec":
        return cls("free", {})

    @classmethod
    def harmonic(cls, k: float = 1.0, center: float = 0.0) -> "PotentialSpec":
        return cls("harmonic", {"k": k, "center": center})

    @classmethod
    def barrier(cls, height: float, width: float, center: float = 0.0, edge: float = 0.0) -> "PotentialSpec":
        return cls("barrier", {"height": height, "width": width, "center": center, "edge": edge})

    @classmethod
    def coulomb_regularized(cls, charge: float = 1.0, softening: float = 1.0) -> "PotentialSpec":
        return cls("coulomb_regularized", {"charge": charge, "softening": softening})

    @classmethod
    def coulomb(cls, charge: float = 1.0) -> "PotentialSpec":
        return cls("coulomb", {"charge": charge})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return 0.5 * p["k"] * (x - p.get("center", 0.0)) ** 2
        if self.kind == "barrier":
            shifted = x - p.get("center", 0.0)
            half = 0.5 * p["width"]
            edge = p.get("edge", 0.0)
            if edge == 0.0:
                return np.where(np.abs(shifted) <= half, p["height"], 0.0)
            return 0.5 * p["height"] * (np.tanh((shifted + half) / edge) - np.tanh((shifted - half) / edge))
        if self.kind == "coulomb_regularized":
            return -p["charge"] / np.sqrt(x ** 2 + p["softening"] ** 2)
        with np.errstate(divide="ignore"):
            return -p["charge"] / np.abs(x)

    def derivative(self, x):
        """dU/dx in closed form."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return p["k"] * (x - p.get("center", 0.0))
        if self.kind == "barrier":
            edge = p.get("edge", 0.0)
            if edge == 0.0:
                return np.zeros_like(x)
            shifted = x - p.get("center", 0.0)
            half = 0.5 * p["width"]
            sech2 = lambda z: 1.0 / np.cosh(z) ** 2
            return 0.5 * p["height"] / edge * (sech2((shifted + half) / edge) - sech2((shifted - half) / edge))
        if self.kind == "coulomb_regularized":
            return p["charge"] * x / (x ** 2 + p["softening"] ** 2) ** 1.5
        with np.errstate(divide="ignore"):
            return p["charge"] * np.sign(x) / x ** 2

    @property
    def is_confining(self) -> bool:
        return self.kind == "harmonic"

    @property
    def is_singular(self) -> bool:
        return self.kind == "coulomb"

    def origin_series(self) -> Tuple[float, float]:
        """(c, U0) with U(r) = c/r + U0 + O(r) as r -> 0+."""
        if self.kind == "coulomb":
            return -self.params["charge"], 0.0
        return 0.0, float(self(0.0))

    def max_abs_on(self, x: np.ndarray) -> float:
        return float(np.max(np.abs(self(x))))

    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(sorted(self.params.items()))}


def parse_potential(name: str, **params) -> PotentialSpec:
    """Build a spec from a CLI-style name and keyword parameters."""
    name = name.replace("-", "_")
    builders = {
        "free": PotentialSpec.free,
        "harmonic": PotentialSpec.harmonic,
        "barrier": PotentialSpec.barrier,
        "coulomb_regularized": PotentialSpec.coulomb_regularized,
        "coulomb": PotentialSpec.coulomb,
    }
    if name not in builders:
        raise DomainError(f"unknown potential '{name}', expected one of {sorted(builders)}")
    try:
        return builders[name](**params)
    except TypeError as e:
        raise DomainError(f"bad parameters for potential '{name}': {e}") from e
