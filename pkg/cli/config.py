"""
Run configuration
Flags over config file over defaults, frozen into one serializable RunConfig.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from core.constants import PHASE_CONVENTIONS, PhysicsConstants
from core.errors import ConfigError, FurthlabError
from core.rng import check_seed

logger = logging.getLogger(__name__)

VERBS = ("kernels", "paths", "evolve", "wkb", "radial", "dispersions", "all")
PRESET_NAMES = ("quick", "full")

# Monte Carlo sizes, sweeps and damping levels per preset
PRESETS: Dict[str, Dict[str, Any]] = {
    "quick": {
        "n_paths": 200,
        "n_steps": 500,
        "eps_sweep": (0.04, 0.02, 0.01, 0.005),
        "dampings": (1e-2, 1e-3),
        "spectrum_size": 4,
    },
    "full": {
        "n_paths": 1000,
        "n_steps": 1000,
        "eps_sweep": (0.04, 0.02, 0.01, 0.005, 0.0025),
        "dampings": (1e-2, 1e-3, 1e-4),
        "spectrum_size": 8,
    },
}

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "out": "furthlab-out",
    "preset": "quick",
    "hbar": 1.0,
    "mass": 1.0,
    "phase_convention": "plus",
    "eps": None,
    "n_paths": None,
    "n_steps": None,
    "drift": 1.0,
    "potential": "coulomb",
    "geometry": "spherical",
    "l": 0,
    "n_radial": 0,
    "convention": "half_integer",
    "tau": 1.0,
    "split": 0.5,
    "steps": None,
    "level": 10,
    "l_max": 5,
}

_TYPES = {
    "seed": int,
    "hbar": float,
    "mass": float,
    "eps": float,
    "n_paths": int,
    "n_steps": int,
    "drift": float,
    "l": int,
    "n_radial": int,
    "tau": float,
    "split": float,
    "steps": int,
    "level": int,
    "l_max": int,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; two equal configs produce identical reports."""
    experiment: str
    seed: int = 0
    output_dir: str = "furthlab-out"
    preset: str = "quick"
    constants: PhysicsConstants = field(default_factory=PhysicsConstants)
    phase_convention: str = "plus"
    eps: Optional[float] = None
    n_paths: Optional[int] = None
    n_steps: Optional[int] = None
    drift: float = 1.0
    potential: str = "coulomb"
    geometry: str = "spherical"
    l: int = 0
    n_radial: int = 0
    convention: str = "half_integer"
    tau: float = 1.0
    split: float = 0.5
    steps: Optional[int] = None
    level: int = 10
    l_max: int = 5

    def __post_init__(self):
        if self.experiment not in VERBS:
            raise ConfigError(f"unknown experiment {self.experiment!r}, expected one of {VERBS}")
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"preset must be one of {PRESET_NAMES}, got {self.preset!r}")
        if self.phase_convention not in PHASE_CONVENTIONS:
            raise ConfigError(f"phase convention must be one of {PHASE_CONVENTIONS}, got {self.phase_convention!r}")
        try:
            check_seed(self.seed)
        except FurthlabError as e:
            raise ConfigError(str(e)) from e
        for name in ("n_paths", "n_steps", "steps"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")

    def preset_value(self, name: str):
        """Flag value when given, else the preset's."""
        value = getattr(self, name, None)
        return PRESETS[self.preset][name] if value is None else value

    @property
    def sweep(self) -> Tuple[float, ...]:
        return tuple(PRESETS[self.preset]["eps_sweep"])

    @property
    def dampings(self) -> Tuple[float, ...]:
        return tuple(PRESETS[self.preset]["dampings"])

    def as_dict(self) -> Dict[str, Any]:
        """Config echo for the report; the output directory is left out."""
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("constants", "output_dir")}
        out["constants"] = self.constants.as_dict()
        return dict(sorted(out.items()))


def load_config_file(path) -> Dict[str, str]:
    """Flat key=value file; keys are long flag names with '-' replaced by '_'."""
    path = Path(path)
    if not path.is_file():
        logger.error(f"config file {path} not found")
        raise ConfigError(f"config file {path} not found")
    raw = dotenv_values(path)
    values = {}
    for key, value in raw.items():
        name = key.strip().lower().replace("-", "_")
        if name not in DEFAULTS:
            logger.error(f"unknown key {key!r} in {path}")
            raise ConfigError(f"unknown key {key!r} in config file {path}")
        if value is None:
            raise ConfigError(f"key {key!r} in {path} has no value")
        values[name] = value
    logger.info(f"loaded {len(values)} settings from {path}")
    return values


def _coerce(name: str, value: Any) -> Any:
    kind = _TYPES.get(name)
    if kind is None or value is None or isinstance(value, kind):
        return value
    try:
        return kind(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be {kind.__name__}, got {value!r}") from e


def build_config(verb: str, flags: Mapping[str, Any], config_path=None) -> RunConfig:
    """Merge defaults, the optional config file and flags that were actually given."""
    merged = dict(DEFAULTS)
    if config_path:
        merged.update(load_config_file(config_path))
    merged.update({k: v for k, v in flags.items() if k in DEFAULTS and v is not None})
    values = {name: _coerce(name, value) for name, value in merged.items()}
    try:
        constants = PhysicsConstants(values.pop("hbar"), values.pop("mass"))
    except FurthlabError as e:
        raise ConfigError(str(e)) from e
    values["output_dir"] = str(values.pop("out"))
    return RunConfig(experiment=verb, constants=constants, **values)


def config_summary(config: RunConfig) -> str:
    return ", ".join(f"{k}={v}" for k, v in asdict(config).items() if k != "constants")
